#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "stokit/integrators.hpp"
#include "stokit/sde_model.hpp"

namespace stokit {

// Mean-energy balance d/dt (1/2) E|X|^2 = E[X . b] + (1/2) E Tr(sigma sigma^T)
// along an ensemble. The derivative is a per-path centered difference
// (one-sided at the ends) so the residual carries a paired standard error.
struct MomentSeries {
  std::vector<double> times;
  ChannelStats energy;
  ChannelStats drift_term;
  ChannelStats noise_term;
  ChannelStats residual;
};

// Throws ValidationError with fewer than 3 nodes.
MomentSeries energy_balance_residual(const SdeModel& model, const Ensemble& ensemble);

// Error U = X - Y against the deterministic flow Y of the drift alone.
struct ErrorSeries {
  std::string reference_label;
  std::vector<double> times;
  ChannelStats half_mse;
  ChannelStats drift_term;  // E[U . (b(X) - b(Y))]
  ChannelStats noise_term;  // (1/2) E Tr(sigma sigma^T)(X)
  ChannelStats residual;
};

// Reference by RK4 at dt / 10 from y0, which must equal x0 (ValidationError
// otherwise).
ErrorSeries error_growth_series(const SdeModel& model, const Vector& x0, const Vector& y0, Scheme scheme,
                                const EnsembleConfig& config);

// Share of nodes with |mean| <= sigmas * se.
double fraction_within(const ChannelStats& stats, double sigmas = 3.0);

// Nodewise check of an inequality d/dt E q <= E rhs via the per-path gap
// left_difference(q) - rhs, where rhs is averaged over both ends of the
// step. A node violates when the mean gap exceeds 3 SE.
struct BoundReport {
  std::string check;
  double coefficient = 0.0;  // constant part of the growth coefficient
  std::size_t violations = 0;
  std::size_t nodes = 0;
  std::vector<double> times;  // nodes 1..K (the left difference needs a predecessor)
  std::vector<double> gap;
  std::vector<double> se;
  std::vector<std::size_t> violating_nodes;
  bool pass() const noexcept { return violations == 0; }
};

struct LorenzParams {
  double r = 28.0;
  double s = 10.0;
  double b = 8.0 / 3.0;
  double eps = 0.01;
};

// 2 [-min(s, 1, b) + (r + s + eps) / 2].
double lorenz_energy_coefficient(const LorenzParams& p);

// d/dt E|X|^2 <= coefficient * E|X|^2. Needs at least 1000 paths.
BoundReport lorenz_energy_bound_check(const LorenzParams& p, const Vector& x0, const EnsembleConfig& config);

// How the noise enters the error bound.
//   as_stated          d/dt E|U|^2 <= 2[-min(s,1,b) + (r + s + |y^| + |z^| + eps)/2] E|U|^2
//   with_noise_source  the same plus eps E|X|^2, the trace of sigma sigma^T at X
// The multiplicative noise acts on X rather than on U, so the first form
// cannot hold near t = 0 where E|U|^2 vanishes but its derivative does not.
enum class ErrorBoundForm { as_stated, with_noise_source };

BoundReport lorenz_error_bound_check(const LorenzParams& p, const Vector& x0, const EnsembleConfig& config,
                                     ErrorBoundForm form = ErrorBoundForm::as_stated);

}  // namespace stokit
