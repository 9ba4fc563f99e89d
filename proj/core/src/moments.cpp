#include "stokit/moments.hpp"

#include <algorithm>
#include <cmath>

#include "stokit/errors.hpp"

namespace stokit {
namespace {

constexpr std::size_t kMinBoundPaths = 1000;
constexpr double kBoundSigmas = 3.0;

BoundReport summarize(std::string check, double coefficient, const Ensemble& ens, const std::string& channel) {
  const ChannelStats& g = ens.channel(channel);
  BoundReport rep;
  rep.check = std::move(check);
  rep.coefficient = coefficient;
  for (std::size_t k = 1; k < ens.times.size(); ++k) {
    rep.times.push_back(ens.times[k]);
    rep.gap.push_back(g.mean[k]);
    rep.se.push_back(g.se[k]);
    if (g.mean[k] > kBoundSigmas * g.se[k]) {
      ++rep.violations;
      rep.violating_nodes.push_back(k);
    }
  }
  rep.nodes = rep.times.size();
  return rep;
}

void require_bound_config(const EnsembleConfig& config) {
  if (config.n_paths < kMinBoundPaths)
    throw ValidationError("Lorenz bound checks need at least 1000 paths");
}

}  // namespace

MomentSeries energy_balance_residual(const SdeModel& model, const Ensemble& ensemble) {
  (void)model;
  if (ensemble.times.size() < 3) throw ValidationError("energy_balance_residual: need at least 3 time nodes");
  MomentSeries s;
  s.times = ensemble.times;
  s.energy = ensemble.channel("energy");
  s.drift_term = ensemble.channel("drift_term");
  s.noise_term = ensemble.channel("noise_term");
  s.residual = ensemble.channel("energy_residual");
  return s;
}

ErrorSeries error_growth_series(const SdeModel& model, const Vector& x0, const Vector& y0, Scheme scheme,
                                const EnsembleConfig& config) {
  if (x0.size() != y0.size() || x0 != y0)
    throw ValidationError("error_growth_series: reference must start from the ensemble's initial state");
  const Trajectory reference = rk4_flow(model, y0, config.t0, config.T, config.dt, 10);
  const Ensemble ens = run_ensemble(model, x0, scheme, config, {}, &reference);
  if (ens.times.size() < 3) throw ValidationError("error_growth_series: need at least 3 time nodes");
  ErrorSeries s;
  s.reference_label = "rk4(dt/10) " + model.label();
  s.times = ens.times;
  s.half_mse = ens.channel("error_half_mse");
  s.drift_term = ens.channel("error_drift_term");
  s.noise_term = ens.channel("error_noise_term");
  s.residual = ens.channel("error_residual");
  return s;
}

double fraction_within(const ChannelStats& stats, double sigmas) {
  if (stats.mean.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t k = 0; k < stats.mean.size(); ++k)
    if (std::abs(stats.mean[k]) <= sigmas * stats.se[k]) ++ok;
  return static_cast<double>(ok) / static_cast<double>(stats.mean.size());
}

double lorenz_energy_coefficient(const LorenzParams& p) {
  return 2.0 * (-std::min({p.s, 1.0, p.b}) + 0.5 * (p.r + p.s + p.eps));
}

BoundReport lorenz_energy_bound_check(const LorenzParams& p, const Vector& x0, const EnsembleConfig& config) {
  require_bound_config(config);
  const double coef = lorenz_energy_coefficient(p);
  const double dt = config.dt;
  PathFunctional gap{"energy_gap", [coef, dt](const Trajectory& traj, std::span<double> out) {
                       out[0] = 0.0;
                       for (std::size_t k = 1; k < traj.size(); ++k) {
                         const double q0 = traj.states.col(k - 1).squaredNorm();
                         const double q1 = traj.states.col(k).squaredNorm();
                         out[k] = (q1 - q0) / dt - coef * 0.5 * (q0 + q1);
                       }
                     }};
  const SdeModel model = models::lorenz(p.r, p.s, p.b, p.eps);
  const Ensemble ens = run_ensemble(model, x0, Scheme::euler_maruyama, config, {gap});
  return summarize("lorenz_energy_bound", coef, ens, "energy_gap");
}

BoundReport lorenz_error_bound_check(const LorenzParams& p, const Vector& x0, const EnsembleConfig& config,
                                     ErrorBoundForm form) {
  require_bound_config(config);
  const double base = lorenz_energy_coefficient(p);
  const SdeModel model = models::lorenz(p.r, p.s, p.b, p.eps);
  const Trajectory ref = rk4_flow(model, x0, config.t0, config.T, config.dt, 10);
  const double dt = config.dt, eps = p.eps;
  const bool source = form == ErrorBoundForm::with_noise_source;

  // Per-node coefficient 2[-min + (r + s + |y^| + |z^| + eps)/2].
  std::vector<double> coef(ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k)
    coef[k] = base + std::abs(ref.states(1, k)) + std::abs(ref.states(2, k));

  PathFunctional gap{"error_gap", [coef, ref, dt, eps, source](const Trajectory& traj, std::span<double> out) {
                       if (traj.size() != ref.size())
                         throw ValidationError("lorenz_error_bound_check: reference grid mismatch");
                       auto rhs = [&](std::size_t k, double u2) {
                         double v = coef[k] * u2;
                         if (source) v += eps * traj.states.col(k).squaredNorm();
                         return v;
                       };
                       out[0] = 0.0;
                       double u_prev = 0.0;
                       for (std::size_t k = 0; k < traj.size(); ++k) {
                         const double u2 = (traj.states.col(k) - ref.states.col(k)).squaredNorm();
                         if (k > 0) out[k] = (u2 - u_prev) / dt - 0.5 * (rhs(k - 1, u_prev) + rhs(k, u2));
                         u_prev = u2;
                       }
                     }};
  const Ensemble ens = run_ensemble(model, x0, Scheme::euler_maruyama, config, {gap});
  return summarize(source ? "lorenz_error_bound_with_noise_source" : "lorenz_error_bound", base, ens, "error_gap");
}

}  // namespace stokit
