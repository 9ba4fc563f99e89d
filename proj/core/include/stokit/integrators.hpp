#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stokit/brownian.hpp"
#include "stokit/parallel.hpp"
#include "stokit/sde_model.hpp"
#include "stokit/trajectory.hpp"

namespace stokit {

enum class Scheme { euler_maruyama, milstein, exact };

std::string to_string(Scheme scheme);
// Accepts "em", "euler_maruyama", "milstein", "exact".
Scheme parse_scheme(const std::string& name);

// Any component magnitude above this aborts the path.
inline constexpr double kBlowUpThreshold = 1e12;

// X_{k+1} = X_k + b dt + sigma dW on the path grid between t0 and T.
// Throws BlowUpError with the offending time.
Trajectory euler_maruyama(const SdeModel& model, const Vector& x0, const BrownianPath& path, double t0,
                          double T);

// Euler step plus 0.5 (D sigma^j sigma^j)((dW_j)^2 - dt) per column. Needs
// m = 1, diagonal, or additive noise (CapabilityError otherwise) and
// Jacobians.
Trajectory milstein(const SdeModel& model, const Vector& x0, const BrownianPath& path, double t0,
                    double T);

// Maps a pre-sampled path to a trajectory on [t0, T].
using PathSolver = std::function<Trajectory(const BrownianPath&, const Vector& x0, double t0, double T)>;

// Solver for euler_maruyama or milstein; Scheme::exact needs closed_form.
PathSolver scheme_solver(const SdeModel& model, Scheme scheme);

// Deterministic drift-only flow dY = b(t, Y) dt by classical RK4, sampled at
// t0 + k dt; each grid step is split into `substeps` RK4 steps.
Trajectory rk4_flow(const SdeModel& model, const Vector& x0, double t0, double T, double dt,
                    int substeps = 1);

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> se;
};

// Extra per-node statistic evaluated on every surviving trajectory; `eval`
// writes one value per node.
struct PathFunctional {
  std::string name;
  std::function<void(const Trajectory&, std::span<double>)> eval;
};

struct EnsembleConfig {
  std::size_t n_paths = 1000;
  double t0 = 0.0;
  double T = 1.0;
  double dt = 1e-3;
  std::uint64_t master_seed = 42;
  int workers = default_workers();
  double max_blowup_fraction = 0.01;
};

// Moment summary of an ensemble. Built-in channels, per node:
//   energy           0.5 |X|^2
//   drift_term       X . b(X)
//   noise_term       0.5 Tr(sigma sigma^T)(X)
//   energy_rate      d/dt of 0.5 |X|^2 per path (centered, one-sided at ends)
//   energy_residual  energy_rate - drift_term - noise_term
// and, when a deterministic reference Y is given, with U = X - Y:
//   error_half_mse, error_drift_term (U . [b(X) - b(Y)]), error_noise_term,
//   error_rate, error_residual.
// Standard errors are those of the per-path samples of each channel.
struct Ensemble {
  std::uint64_t master_seed = 0;
  std::size_t n_paths = 0;
  std::size_t n_used = 0;
  std::size_t blowups = 0;
  double dt = 0.0;
  std::vector<double> times;
  Matrix mean_state;  // n x nodes
  Matrix var_state;   // n x nodes, unbiased sample variance
  std::map<std::string, ChannelStats> channels;

  const ChannelStats& channel(const std::string& name) const;
};

// Path i is driven by sample_path(derive_seed(master_seed, i), m, min(t0, 0), T, dt).
// Paths that blow up are excluded and counted; more than max_blowup_fraction
// of them raises BlowUpError. Results are bitwise independent of `workers`.
Ensemble run_ensemble(const SdeModel& model, const Vector& x0, const PathSolver& solver,
                      const EnsembleConfig& config, const std::vector<PathFunctional>& extra = {},
                      const Trajectory* reference = nullptr);
Ensemble run_ensemble(const SdeModel& model, const Vector& x0, Scheme scheme, const EnsembleConfig& config,
                      const std::vector<PathFunctional>& extra = {}, const Trajectory* reference = nullptr);

// A model together with its exact terminal value on a given path.
struct ClosedFormProblem {
  SdeModel model;
  Vector x0;
  std::function<Vector(const BrownianPath&, double T)> exact_terminal;
};

struct OrderStudy {
  Scheme scheme = Scheme::euler_maruyama;
  std::size_t n_paths = 0;
  std::vector<double> dts;
  std::vector<double> rms_error;
  double slope = 0.0;
};

// Least-squares slope of log RMS terminal error against log dt. Paths are
// sampled at the finest dt and subsampled for coarser ones, so every level
// sees the same Brownian realization; the exact value uses the finest path.
OrderStudy strong_order_estimate(const ClosedFormProblem& problem, Scheme scheme, std::vector<double> dt_list,
                                 std::size_t n_paths, double T, std::uint64_t master_seed,
                                 int workers = default_workers());

// Ordinary least-squares slope of y on x.
double fit_slope(std::span<const double> x, std::span<const double> y);

}  // namespace stokit
