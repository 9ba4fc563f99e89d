#include "stokit/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stokit/errors.hpp"
#include "stokit/random.hpp"

namespace stokit {

std::vector<double> Trajectory::component(int c) const {
  std::vector<double> out(size());
  for (std::size_t k = 0; k < size(); ++k) out[k] = states(c, static_cast<Eigen::Index>(k));
  return out;
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::euler_maruyama:
      return "euler_maruyama";
    case Scheme::milstein:
      return "milstein";
    case Scheme::exact:
      return "exact";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "em" || name == "euler_maruyama" || name == "euler") return Scheme::euler_maruyama;
  if (name == "milstein") return Scheme::milstein;
  if (name == "exact") return Scheme::exact;
  throw ValidationError("unknown scheme '" + name + "' (expected em, milstein or exact)");
}

namespace {

struct Span {
  std::size_t first;
  std::size_t last;
};

Span grid_span(const BrownianPath& path, double t0, double T) {
  if (!(T >= t0)) throw ValidationError("integration window must satisfy t0 <= T");
  return {path.index_of(t0), path.index_of(T)};
}

void check_state(const Vector& x, double t, const std::string& label) {
  if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kBlowUpThreshold) {
    std::ostringstream msg;
    msg << "model '" << label << "' blew up at t = " << t;
    throw BlowUpError(msg.str(), t);
  }
}

Trajectory start(const SdeModel& model, const Vector& x0, const BrownianPath& path, Span span) {
  if (x0.size() != model.n()) throw ValidationError("initial state has wrong dimension");
  if (path.m() != model.m()) throw ValidationError("path noise dimension does not match model");
  Trajectory traj;
  traj.label = model.label();
  traj.seed = path.seed();
  const std::size_t n = span.last - span.first + 1;
  traj.times.resize(n);
  for (std::size_t k = 0; k < n; ++k) traj.times[k] = path.time(span.first + k);
  traj.states.resize(model.n(), static_cast<Eigen::Index>(n));
  traj.states.col(0) = x0;
  return traj;
}

Vector increment(const BrownianPath& path, std::size_t i, int m) {
  Vector dw(m);
  for (int c = 0; c < m; ++c) dw[c] = path.dw(i, c);
  return dw;
}

}  // namespace

Trajectory euler_maruyama(const SdeModel& model, const Vector& x0, const BrownianPath& path, double t0,
                          double T) {
  const Span span = grid_span(path, t0, T);
  Trajectory traj = start(model, x0, path, span);
  const double dt = path.dt();
  Vector x = x0;
  for (std::size_t i = span.first; i < span.last; ++i) {
    const double t = path.time(i);
    x = x + model.drift(t, x) * dt + model.diffusion(t, x) * increment(path, i, model.m());
    check_state(x, path.time(i + 1), model.label());
    traj.states.col(static_cast<Eigen::Index>(i + 1 - span.first)) = x;
  }
  return traj;
}

Trajectory milstein(const SdeModel& model, const Vector& x0, const BrownianPath& path, double t0, double T) {
  if (model.m() > 1 && model.noise() == NoiseStructure::general)
    throw CapabilityError("milstein: model '" + model.label() +
                          "' has multi-column noise that is neither diagonal nor additive");
  const Span span = grid_span(path, t0, T);
  Trajectory traj = start(model, x0, path, span);
  const double dt = path.dt();
  const bool additive = model.state_independent_noise();
  Vector x = x0;
  for (std::size_t i = span.first; i < span.last; ++i) {
    const double t = path.time(i);
    const Vector dw = increment(path, i, model.m());
    const Matrix s = model.diffusion(t, x);
    Vector next = x + model.drift(t, x) * dt + s * dw;
    if (!additive) {
      const auto jac = model.diffusion_jacobians(t, x);
      for (int j = 0; j < model.m(); ++j) next += 0.5 * (jac[j] * s.col(j)) * (dw[j] * dw[j] - dt);
    }
    x = std::move(next);
    check_state(x, path.time(i + 1), model.label());
    traj.states.col(static_cast<Eigen::Index>(i + 1 - span.first)) = x;
  }
  return traj;
}

PathSolver scheme_solver(const SdeModel& model, Scheme scheme) {
  switch (scheme) {
    case Scheme::euler_maruyama:
      return [model](const BrownianPath& p, const Vector& x0, double t0, double T) {
        return euler_maruyama(model, x0, p, t0, T);
      };
    case Scheme::milstein:
      if (!model.state_independent_noise()) (void)model.diffusion_jacobians(0.0, Vector::Zero(model.n()));
      return [model](const BrownianPath& p, const Vector& x0, double t0, double T) {
        return milstein(model, x0, p, t0, T);
      };
    case Scheme::exact:
      break;
  }
  throw CapabilityError("scheme_solver: the exact scheme needs a closed-form solver");
}

Trajectory rk4_flow(const SdeModel& model, const Vector& x0, double t0, double T, double dt, int substeps) {
  if (!(dt > 0.0) || substeps < 1) throw ValidationError("rk4_flow: dt and substeps must be positive");
  if (x0.size() != model.n()) throw ValidationError("rk4_flow: initial state has wrong dimension");
  const double steps_real = (T - t0) / dt;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_real))
    throw RangeError("rk4_flow: T - t0 is not a multiple of dt");

  Trajectory traj;
  traj.label = model.label() + ":deterministic";
  traj.times.resize(steps + 1);
  traj.states.resize(model.n(), static_cast<Eigen::Index>(steps + 1));
  traj.times[0] = t0;
  traj.states.col(0) = x0;
  const double h = dt / substeps;
  Vector y = x0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double tk = t0 + static_cast<double>(k) * dt;
    for (int j = 0; j < substeps; ++j) {
      const double t = tk + j * h;
      const Vector k1 = model.drift(t, y);
      const Vector k2 = model.drift(t + 0.5 * h, y + 0.5 * h * k1);
      const Vector k3 = model.drift(t + 0.5 * h, y + 0.5 * h * k2);
      const Vector k4 = model.drift(t + h, y + h * k3);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    check_state(y, tk + dt, traj.label);
    traj.times[k + 1] = t0 + static_cast<double>(k + 1) * dt;
    traj.states.col(static_cast<Eigen::Index>(k + 1)) = y;
  }
  return traj;
}

const ChannelStats& Ensemble::channel(const std::string& name) const {
  auto it = channels.find(name);
  if (it == channels.end()) throw LookupError("ensemble has no channel '" + name + "'");
  return it->second;
}

namespace {

// Per-node Welford statistics for a fixed set of channels; blocks merge with
// Chan's pairwise update.
struct MomentAccumulator {
  std::size_t channels = 0;
  std::size_t nodes = 0;
  std::size_t count = 0;
  std::size_t blowups = 0;
  double first_blowup_time = 0.0;
  std::vector<double> mean;
  std::vector<double> m2;

  MomentAccumulator(std::size_t c, std::size_t n) : channels(c), nodes(n), mean(c * n, 0.0), m2(c * n, 0.0) {}

  void add(std::span<const double> sample) {
    ++count;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const double delta = sample[i] - mean[i];
      mean[i] += delta * inv;
      m2[i] += delta * (sample[i] - mean[i]);
    }
  }

  void merge(const MomentAccumulator& o) {
    if (o.blowups > 0 && blowups == 0) first_blowup_time = o.first_blowup_time;
    blowups += o.blowups;
    if (o.count == 0) return;
    if (count == 0) {
      mean = o.mean;
      m2 = o.m2;
      count = o.count;
      return;
    }
    const double na = static_cast<double>(count), nb = static_cast<double>(o.count);
    const double n = na + nb;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double delta = o.mean[i] - mean[i];
      mean[i] += delta * (nb / n);
      m2[i] += o.m2[i] + delta * delta * (na * nb / n);
    }
    count += o.count;
  }
};

void time_derivative(std::span<const double> f, double dt, std::span<double> out) {
  const std::size_t n = f.size();
  if (n < 2) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  out[0] = (f[1] - f[0]) / dt;
  out[n - 1] = (f[n - 1] - f[n - 2]) / dt;
  for (std::size_t k = 1; k + 1 < n; ++k) out[k] = (f[k + 1] - f[k - 1]) / (2.0 * dt);
}

}  // namespace

Ensemble run_ensemble(const SdeModel& model, const Vector& x0, const PathSolver& solver,
                      const EnsembleConfig& config, const std::vector<PathFunctional>& extra,
                      const Trajectory* reference) {
  if (config.n_paths < 1) throw ValidationError("run_ensemble: n_paths must be at least 1");
  if (!(config.dt > 0.0)) throw ValidationError("run_ensemble: dt must be positive");
  if (!(config.T > config.t0)) throw ValidationError("run_ensemble: need T > t0");
  if (x0.size() != model.n()) throw ValidationError("run_ensemble: initial state has wrong dimension");

  // Probe the grid once so every path shares the node count.
  const BrownianPath probe = sample_path(0, 1, std::min(config.t0, 0.0), config.T, config.dt);
  const std::size_t first = probe.index_of(config.t0);
  const std::size_t nodes = probe.index_of(config.T) - first + 1;
  std::vector<double> times(nodes);
  for (std::size_t k = 0; k < nodes; ++k) times[k] = probe.time(first + k);

  if (reference) {
    if (reference->size() != nodes) throw ValidationError("run_ensemble: reference grid does not match");
    if (reference->dim() != model.n() || !(reference->state(0) - x0).isZero(0.0))
      throw ValidationError("run_ensemble: reference must start from the same initial state");
  }

  const int n = model.n();
  std::vector<std::string> names = {"energy", "drift_term", "noise_term", "energy_rate", "energy_residual"};
  if (reference)
    for (const char* e : {"error_half_mse", "error_drift_term", "error_noise_term", "error_rate", "error_residual"})
      names.emplace_back(e);
  for (const auto& f : extra) names.push_back(f.name);
  const std::size_t base = static_cast<std::size_t>(n);  // state channels come first
  const std::size_t n_channels = base + names.size();
  const double dt = config.dt;

  auto make = [&] { return MomentAccumulator(n_channels, nodes); };
  auto map = [&](std::size_t i, MomentAccumulator& acc) {
    const std::uint64_t seed = derive_seed(config.master_seed, i);
    const BrownianPath path = sample_path(seed, model.m(), std::min(config.t0, 0.0), config.T, dt);
    Trajectory traj;
    try {
      traj = solver(path, x0, config.t0, config.T);
    } catch (const BlowUpError& e) {
      if (acc.blowups == 0) acc.first_blowup_time = e.time();
      ++acc.blowups;
      return;
    }
    std::vector<double> sample(n_channels * nodes);
    auto row = [&](std::size_t c) { return std::span<double>(sample.data() + c * nodes, nodes); };
    for (std::size_t k = 0; k < nodes; ++k) {
      const Vector x = traj.state(k);
      for (int c = 0; c < n; ++c) sample[c * nodes + k] = x[c];
      const Vector b = model.drift(traj.times[k], x);
      const Matrix s = model.diffusion(traj.times[k], x);
      row(base + 0)[k] = 0.5 * x.squaredNorm();
      row(base + 1)[k] = x.dot(b);
      row(base + 2)[k] = 0.5 * s.squaredNorm();
      if (reference) {
        const Vector y = reference->state(k);
        const Vector u = x - y;
        row(base + 5)[k] = 0.5 * u.squaredNorm();
        row(base + 6)[k] = u.dot(b - model.drift(traj.times[k], y));
        row(base + 7)[k] = 0.5 * s.squaredNorm();
      }
    }
    time_derivative(row(base + 0), dt, row(base + 3));
    for (std::size_t k = 0; k < nodes; ++k) row(base + 4)[k] = row(base + 3)[k] - row(base + 1)[k] - row(base + 2)[k];
    std::size_t next = base + 5;
    if (reference) {
      time_derivative(row(base + 5), dt, row(base + 8));
      for (std::size_t k = 0; k < nodes; ++k)
        row(base + 9)[k] = row(base + 8)[k] - row(base + 6)[k] - row(base + 7)[k];
      next = base + 10;
    }
    for (const auto& f : extra) f.eval(traj, row(next++));
    acc.add(sample);
  };

  MomentAccumulator total = reduce_paths<MomentAccumulator>(config.n_paths, config.workers, make, map);

  const double allowed = config.max_blowup_fraction * static_cast<double>(config.n_paths);
  if (static_cast<double>(total.blowups) > allowed || total.count == 0) {
    std::ostringstream msg;
    msg << "run_ensemble: " << total.blowups << " of " << config.n_paths << " paths of model '" << model.label()
        << "' blew up (first at t = " << total.first_blowup_time << ")";
    throw BlowUpError(msg.str(), total.first_blowup_time);
  }

  Ensemble ens;
  ens.master_seed = config.master_seed;
  ens.n_paths = config.n_paths;
  ens.n_used = total.count;
  ens.blowups = total.blowups;
  ens.dt = dt;
  ens.times = std::move(times);
  const double cnt = static_cast<double>(total.count);
  auto variance = [&](std::size_t idx) { return total.count > 1 ? total.m2[idx] / (cnt - 1.0) : 0.0; };
  ens.mean_state.resize(n, static_cast<Eigen::Index>(nodes));
  ens.var_state.resize(n, static_cast<Eigen::Index>(nodes));
  for (int c = 0; c < n; ++c)
    for (std::size_t k = 0; k < nodes; ++k) {
      ens.mean_state(c, static_cast<Eigen::Index>(k)) = total.mean[c * nodes + k];
      ens.var_state(c, static_cast<Eigen::Index>(k)) = variance(c * nodes + k);
    }
  for (std::size_t j = 0; j < names.size(); ++j) {
    ChannelStats stats;
    stats.mean.resize(nodes);
    stats.se.resize(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
      const std::size_t idx = (base + j) * nodes + k;
      stats.mean[k] = total.mean[idx];
      stats.se[k] = std::sqrt(variance(idx) / cnt);
    }
    ens.channels.emplace(names[j], std::move(stats));
  }
  return ens;
}

Ensemble run_ensemble(const SdeModel& model, const Vector& x0, Scheme scheme, const EnsembleConfig& config,
                      const std::vector<PathFunctional>& extra, const Trajectory* reference) {
  return run_ensemble(model, x0, scheme_solver(model, scheme), config, extra, reference);
}

double fit_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit_slope: need at least two points");
  const double k = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw ValidationError("fit_slope: x values are all equal");
  return sxy / sxx;
}

namespace {

struct SquaredErrors {
  std::vector<double> sum;
  explicit SquaredErrors(std::size_t levels) : sum(levels, 0.0) {}
  void merge(const SquaredErrors& o) {
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += o.sum[i];
  }
};

}  // namespace

OrderStudy strong_order_estimate(const ClosedFormProblem& problem, Scheme scheme, std::vector<double> dt_list,
                                 std::size_t n_paths, double T, std::uint64_t master_seed, int workers) {
  if (dt_list.size() < 3) throw ValidationError("strong_order_estimate: need at least 3 step sizes");
  if (n_paths < 1) throw ValidationError("strong_order_estimate: n_paths must be positive");
  std::sort(dt_list.begin(), dt_list.end());
  const double finest = dt_list.front();
  std::vector<int> factors;
  for (double dt : dt_list) {
    const double ratio = dt / finest;
    const long r = std::lround(ratio);
    if (std::abs(ratio - static_cast<double>(r)) > 1e-9 * ratio)
      throw ValidationError("strong_order_estimate: step sizes must be integer multiples of the finest");
    factors.push_back(static_cast<int>(r));
  }
  const PathSolver solver = scheme_solver(problem.model, scheme);

  auto make = [&] { return SquaredErrors(dt_list.size()); };
  auto map = [&](std::size_t i, SquaredErrors& acc) {
    const BrownianPath fine = sample_path(derive_seed(master_seed, i), problem.model.m(), 0.0, T, finest);
    const Vector exact = problem.exact_terminal(fine, T);
    for (std::size_t l = 0; l < factors.size(); ++l) {
      const BrownianPath coarse = factors[l] == 1 ? fine : fine.coarsen(factors[l]);
      const Vector approx = solver(coarse, problem.x0, 0.0, T).terminal();
      acc.sum[l] += (approx - exact).squaredNorm();
    }
  };
  const SquaredErrors total = reduce_paths<SquaredErrors>(n_paths, workers, make, map);

  OrderStudy study;
  study.scheme = scheme;
  study.n_paths = n_paths;
  study.dts = dt_list;
  std::vector<double> lx, ly;
  for (std::size_t l = 0; l < dt_list.size(); ++l) {
    study.rms_error.push_back(std::sqrt(total.sum[l] / static_cast<double>(n_paths)));
    lx.push_back(std::log(dt_list[l]));
    ly.push_back(std::log(study.rms_error.back()));
  }
  study.slope = fit_slope(lx, ly);
  return study;
}

}  // namespace stokit
