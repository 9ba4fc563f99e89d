#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace stokit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using DriftFn = std::function<Vector(double t, const Vector& x)>;
using DiffusionFn = std::function<Matrix(double t, const Vector& x)>;
// Returns D sigma^j (n x n) for every column j of sigma.
using JacobianFn = std::function<std::vector<Matrix>(double t, const Vector& x)>;
using Params = std::map<std::string, double>;

enum class JacobianSource { analytic, finite_difference, none };

// additive: sigma does not depend on the state. diagonal: n == m and sigma is
// diagonal, so the noise is commutative.
enum class NoiseStructure { general, additive, diagonal };

// Ito SDE dX = b(t, X) dt + sigma(t, X) dW with X in R^n and W in R^m.
// Immutable; safe to evaluate concurrently.
class SdeModel {
 public:
  // Validates shapes and (when given) the Jacobians against central finite
  // differences at 8 probe states in [-1, 1]^n; throws ValidationError.
  SdeModel(std::string label, int n, int m, DriftFn drift, DiffusionFn diffusion,
           JacobianFn jacobians = {}, NoiseStructure noise = NoiseStructure::general,
           Params params = {});

  const std::string& label() const noexcept { return label_; }
  int n() const noexcept { return n_; }
  int m() const noexcept { return m_; }
  const Params& params() const noexcept { return params_; }
  NoiseStructure noise() const noexcept { return noise_; }
  JacobianSource jacobian_source() const noexcept { return jac_source_; }
  bool state_independent_noise() const noexcept { return noise_ == NoiseStructure::additive; }

  Vector drift(double t, const Vector& x) const { return drift_(t, x); }
  Matrix diffusion(double t, const Vector& x) const { return diffusion_(t, x); }
  // Throws CapabilityError when the model has no Jacobian source.
  std::vector<Matrix> diffusion_jacobians(double t, const Vector& x) const;

  // Copy whose missing Jacobians are replaced by central differences with
  // step 1e-6 * (1 + |x_k|). Analytic Jacobians are kept.
  SdeModel with_finite_difference_jacobians() const;
  SdeModel with_drift(std::string label, DriftFn drift) const;
  SdeModel with_params(Params params) const;

 private:
  std::string label_;
  int n_;
  int m_;
  DriftFn drift_;
  DiffusionFn diffusion_;
  JacobianFn jacobians_;
  JacobianSource jac_source_;
  NoiseStructure noise_;
  Params params_;
};

// Central-difference Jacobians of the sigma columns.
std::vector<Matrix> finite_difference_jacobians(const DiffusionFn& sigma, int n, int m, double t,
                                                const Vector& x);

// Scalar observable g(t, x) with derivatives.
struct ScalarObservable {
  std::function<double(double, const Vector&)> value;
  std::function<Vector(double, const Vector&)> gradient;
  std::function<Matrix(double, const Vector&)> hessian;
  std::function<double(double, const Vector&)> time_derivative;  // empty means g_t = 0

  double g_t(double t, const Vector& x) const { return time_derivative ? time_derivative(t, x) : 0.0; }

  // g = 0.5 |x|^2
  static ScalarObservable half_norm_squared();
  // g = c . x + c0
  static ScalarObservable linear(Vector c, double c0 = 0.0);
  // g = x_k^2
  static ScalarObservable square(int k);
  // g = ln x_k (for positive states)
  static ScalarObservable log_component(int k);
  static ScalarObservable constant(double c);
};

// Throws ValidationError if gradient or Hessian disagree with finite
// differences of g beyond 1e-5 relative at 8 probe states.
void validate_observable(const ScalarObservable& obs, int n);

// (grad g)^T b + 0.5 Tr[sigma sigma^T D^2 g] + g_t at (t, x).
double apply_generator(const SdeModel& model, const ScalarObservable& obs, const Vector& x,
                       double t = 0.0);

// 0.5 * sum_j [D sigma^j] sigma^j, the drift difference between the Ito and
// Stratonovich forms.
Vector noise_induced_drift(const SdeModel& model, double t, const Vector& x);

// Reads the model as a Stratonovich SDE and returns the equivalent Ito
// model: drift b + 0.5 sum_j D sigma^j sigma^j, same diffusion.
SdeModel stratonovich_to_ito(const SdeModel& model);
// Inverse of stratonovich_to_ito.
SdeModel ito_to_stratonovich(const SdeModel& model);
// mu(x) = b(x) - 0.5 sum_j D sigma^j(x) sigma^j(x).
Vector ito_to_stratonovich_drift(const SdeModel& model, const Vector& x, double t = 0.0);

// Named model constructors.
namespace models {

SdeModel langevin(double b, double a);
SdeModel population(double r, double alpha);
SdeModel linear_scalar(double a1, double a2, double b1, double b2);
SdeModel linear_scalar(std::function<double(double)> a1, std::function<double(double)> a2,
                       std::function<double(double)> b1, std::function<double(double)> b2);
SdeModel linear_system(Matrix A, std::function<Vector(double)> f,
                       std::vector<std::function<Vector(double)>> g);
SdeModel linear_system(Matrix A, Vector f, Matrix G);
SdeModel oscillator(double a, double b, double sigma);
SdeModel harmonic(double k, double h);
SdeModel lorenz(double r, double s, double b, double eps);
SdeModel circle_manifold();
SdeModel brownian(int n, double scale);

}  // namespace models

struct CatalogEntry {
  std::string name;
  std::string summary;
  Params defaults;
  std::function<SdeModel(const Params&)> make;
};

// Every builtin model, sorted by name.
const std::vector<CatalogEntry>& builtin_models();
// Builds a builtin by name; missing params take defaults. Throws LookupError
// for an unknown name and ValidationError for an unknown parameter.
SdeModel make_builtin(const std::string& name, const Params& overrides = {});

}  // namespace stokit
