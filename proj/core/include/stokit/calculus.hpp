#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stokit/brownian.hpp"
#include "stokit/parallel.hpp"
#include "stokit/sde_model.hpp"
#include "stokit/trajectory.hpp"

namespace stokit {

// f(t_j, w) at every node of a path grid.
struct IntegrandOnGrid {
  std::vector<double> values;
};

// F(t_j, w) as an n x m matrix per node.
struct MatrixIntegrandOnGrid {
  std::vector<Matrix> values;
};

// Outcome of a Monte Carlo identity or inequality check.
//   equality:    pass iff |lhs - rhs| <= 3 se
//   upper_bound: pass iff lhs <= rhs + 3 se
// se is the standard error of the paired per-path difference lhs_i - rhs_i.
struct IdentityReport {
  enum class Kind { equality, upper_bound };

  std::string check;
  double lhs = 0.0;
  double rhs = 0.0;
  double se = 0.0;
  std::size_t n_samples = 0;
  Kind kind = Kind::equality;
  bool pass = false;
};

inline constexpr double kPassSigmas = 3.0;

// Left-point sum  sum_j f(t_j) (W(t_{j+1}) - W(t_j))  over [a, b].
double ito_integral(const IntegrandOnGrid& f, const BrownianPath& path, double a, double b, int component = 0);
// n-vector  sum_j F(t_j) dW_j.
Vector ito_integral(const MatrixIntegrandOnGrid& f, const BrownianPath& path, double a, double b);
// Midpoint sum with f((t_j + t_{j+1}) / 2) taken as the average of adjacent nodes.
double stratonovich_integral(const IntegrandOnGrid& f, const BrownianPath& path, double a, double b,
                             int component = 0);

// Produces the integrand for one sampled path.
using IntegrandSampler = std::function<IntegrandOnGrid(const BrownianPath&)>;

namespace integrands {
IntegrandSampler constant(double c);
IntegrandSampler time();              // f(t) = t
IntegrandSampler brownian(double scale = 1.0);  // f = scale * W(t)
}  // namespace integrands

// Shared Monte Carlo settings; path i uses seed derive_seed(master_seed, i).
struct McConfig {
  std::size_t n_paths = 10000;
  double dt = 1e-3;
  std::uint64_t master_seed = 42;
  int workers = default_workers();
};

// E (int_0^T f dW)^2  vs  E int_0^T f^2 dt.  Needs n_paths >= 1000.
IdentityReport isometry_check(const IntegrandSampler& f, double T, const McConfig& mc);

// E (int_0^a f dW)(int_0^b g dW)  vs  E int_0^{min(a,b)} f g dt.
IdentityReport generalized_isometry_check(const IntegrandSampler& f, const IntegrandSampler& g, double a, double b,
                                          const McConfig& mc);

// P(sup_{t0<=t<=T} |int_{t0}^t f dW| >= lambda)  <=  E int_{t0}^T f^2 dt / lambda^2.
IdentityReport doob_bound_check(const IntegrandSampler& f, double lambda, double t0, double T, const McConfig& mc);

// E sup_{t0<=t<=T} |int_{t0}^t f dW|^2  <=  4 E int_{t0}^T f^2 dt.
IdentityReport second_moment_sup_check(const IntegrandSampler& f, double t0, double T, const McConfig& mc);

// Simulates X by Euler-Maruyama on `path` from x0 over [0, t_max] and returns
// |g(T, X_T) - [g(0, x0) + sum (g_t + grad g . b + 0.5 Tr(sigma sigma^T D^2 g)) dt
//                          + sum grad g^T sigma dW]|.
double ito_formula_residual(const SdeModel& model, const ScalarObservable& g, const BrownianPath& path,
                            const Vector& x0);

// |X_N Y_N - X_0 Y_0 - sum (X_j dY_j + Y_j dX_j + dX_j dY_j)| for component
// `cx` of X and `cy` of Y. Both trajectories must share a grid.
double product_rule_residual(const Trajectory& X, const Trajectory& Y, int cx = 0, int cy = 0);

}  // namespace stokit
