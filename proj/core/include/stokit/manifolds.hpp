#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stokit/brownian.hpp"
#include "stokit/integrators.hpp"
#include "stokit/sde_model.hpp"
#include "stokit/trajectory.hpp"

namespace stokit {

// Hypersurface M = {G = 0} with its gradient.
struct ManifoldSpec {
  std::string label;
  std::function<double(const Vector&)> G;
  std::function<Vector(const Vector&)> grad;
};

// G = x^2 + y^2 - radius^2.
ManifoldSpec circle_spec(double radius = 1.0);
// G = x^2 + 2 y^2 - c; not invariant for the circle model.
ManifoldSpec ellipse_spec(double c = 1.0);
// lambda G.
ManifoldSpec scaled(const ManifoldSpec& spec, double lambda);

// Compares grad against central differences at `probes` (relative 1e-5) and
// checks grad != 0 where |G| is small. ValidationError on failure.
void validate_manifold(const ManifoldSpec& spec, const std::vector<Vector>& probes);

// r_mu = <mu, grad G> with mu = b - (1/2) sum_j (D sigma^j) sigma^j, and
// r_sigma_j = <sigma^j, grad G>. All vanish on M when M is almost surely
// invariant. CapabilityError without diffusion Jacobians.
struct TangencyResidual {
  double r_mu = 0.0;
  Vector r_sigma;
};

TangencyResidual tangency_residual(const SdeModel& model, const ManifoldSpec& spec, const Vector& x, double t = 0.0);

// Zero threshold for tangency residuals: 1e-10 with analytic Jacobians,
// 1e-6 with finite-difference ones.
double tangency_tolerance(const SdeModel& model);

// Quasi-linear first-order problem sum_i a_i(x) du/dx_i = c(x, u) with
// initial data Gamma0: s -> (x, u), s in R^{n-1}.
struct CharacteristicField {
  int n = 2;
  std::function<Vector(const Vector&)> a;
  std::function<double(const Vector&, double)> c;
  std::function<std::pair<Vector, double>(const Vector&)> gamma0;
};

struct CharacteristicCurve {
  Vector s;
  std::vector<double> t;
  Matrix x;  // n x samples
  std::vector<double> u;
  bool truncated = false;  // left the bounding box
};

struct BoundingBox {
  Vector lo;
  Vector hi;
};

struct CharacteristicSurface {
  int n = 2;
  std::vector<CharacteristicCurve> curves;  // in s-grid order
};

// RK4 on dx/dt = a(x), du/dt = c(x, u) from each Gamma0 sample over t_span
// (t_span.second may be negative to march backwards). Curves stop at the
// first sample outside `box`, which is flagged.
CharacteristicSurface characteristics_solve(const CharacteristicField& field, const std::vector<Vector>& s_grid,
                                            std::pair<double, double> t_span, double dt,
                                            const std::optional<BoundingBox>& box = std::nullopt);

// Transversality of (a, c) to the tangent space of Gamma0 in (x, u) space,
// from the least singular value of [unit tangents | unit (a, c)].
struct NoncharacteristicReport {
  bool pass = true;
  std::vector<double> least_singular_value;  // per sample
  std::vector<std::size_t> failing;
};

NoncharacteristicReport noncharacteristic_check(const CharacteristicField& field, const std::vector<Vector>& s_grid,
                                                double threshold = 1e-8);

// Points where u = 0: sign changes along each curve and, between neighboring
// curves of a one-parameter family, at equal curve time. Empty `points`
// comes with a notice that Gamma0 did not reach u = 0.
struct ZeroSet {
  std::vector<Vector> points;
  std::string notice;
};

ZeroSet extract_zero_set(const CharacteristicSurface& surface);

struct InvarianceLevel {
  double dt = 0.0;
  double median_max_abs_g = 0.0;
  double mean_max_abs_g = 0.0;
  double median_terminal_abs_g = 0.0;
};

struct InvarianceReport {
  std::string manifold;
  std::size_t n_paths = 0;
  std::vector<InvarianceLevel> levels;   // dt, dt/2, ...
  std::vector<double> halving_factors;   // median max |G| ratio between successive levels
};

// Simulates from x0 on M with `scheme` at dt, dt/2, ..., dt/2^halvings on the
// same Brownian paths and reports max_t |G(X_t)| and |G(X_T)|. ValidationError
// unless |G(x0)| <= 1e-10.
InvarianceReport manifold_invariance_mc(const SdeModel& model, const ManifoldSpec& spec, const Vector& x0,
                                        std::size_t n_paths, double dt, double T, std::uint64_t master_seed,
                                        int halvings = 2, Scheme scheme = Scheme::milstein,
                                        int workers = default_workers());

// The circle model restricted to its invariant circle: theta = theta0 + W_t,
// lifted to (cos theta, sin theta). CapabilityError for any other model.
struct ReducedTrajectory {
  std::vector<double> theta;
  Trajectory lifted;
};

ReducedTrajectory restrict_circle(const SdeModel& model, double theta0, const BrownianPath& path, double T);

}  // namespace stokit
