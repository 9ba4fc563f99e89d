#include "stokit/calculus.hpp"

#include <algorithm>
#include <cmath>

#include "stokit/errors.hpp"
#include "stokit/integrators.hpp"
#include "stokit/random.hpp"

namespace stokit {
namespace {

struct Window {
  std::size_t first;
  std::size_t last;
};

Window window(const BrownianPath& path, double a, double b) {
  if (!(a < b)) throw ValidationError("integral bounds must satisfy a < b");
  return {path.index_of(a), path.index_of(b)};
}

void check_integrand(const IntegrandOnGrid& f, const BrownianPath& path) {
  if (f.values.size() != path.nodes()) throw ValidationError("integrand length does not match the path grid");
  for (double v : f.values)
    if (!std::isfinite(v)) throw DataError("integrand has a non-finite value");
}

void check_finite(const IntegrandOnGrid& f) {
  for (double v : f.values)
    if (!std::isfinite(v)) throw DataError("integrand sampler produced a non-finite value");
}

// Paired-difference accumulator: lhs_i, rhs_i per path.
struct PairedStats {
  std::size_t count = 0;
  double sum_l = 0, sum_r = 0, sum_d = 0, sum_dd = 0;
  void add(double l, double r) {
    ++count;
    sum_l += l;
    sum_r += r;
    sum_d += l - r;
    sum_dd += (l - r) * (l - r);
  }
  void merge(const PairedStats& o) {
    count += o.count;
    sum_l += o.sum_l;
    sum_r += o.sum_r;
    sum_d += o.sum_d;
    sum_dd += o.sum_dd;
  }
};

IdentityReport finish(std::string name, const PairedStats& s, IdentityReport::Kind kind) {
  IdentityReport r;
  r.check = std::move(name);
  r.kind = kind;
  r.n_samples = s.count;
  const double n = static_cast<double>(s.count);
  r.lhs = s.sum_l / n;
  r.rhs = s.sum_r / n;
  const double mean_d = s.sum_d / n;
  const double var_d = s.count > 1 ? std::max(0.0, (s.sum_dd - n * mean_d * mean_d) / (n - 1.0)) : 0.0;
  r.se = std::sqrt(var_d / n);
  r.pass = kind == IdentityReport::Kind::equality ? std::abs(r.lhs - r.rhs) <= kPassSigmas * r.se
                                                  : r.lhs <= r.rhs + kPassSigmas * r.se;
  return r;
}

void require_paths(const McConfig& mc, std::size_t minimum) {
  if (mc.n_paths < minimum)
    throw ValidationError("need at least " + std::to_string(minimum) + " paths, got " + std::to_string(mc.n_paths));
  if (!(mc.dt > 0.0)) throw ValidationError("dt must be positive");
}

template <class PerPath>
IdentityReport run_check(std::string name, const McConfig& mc, double t_max, IdentityReport::Kind kind,
                         PerPath per_path) {
  auto make = [] { return PairedStats{}; };
  auto map = [&](std::size_t i, PairedStats& acc) {
    const BrownianPath path = sample_path(derive_seed(mc.master_seed, i), 1, 0.0, t_max, mc.dt);
    const auto [l, r] = per_path(path);
    acc.add(l, r);
  };
  return finish(std::move(name), reduce_paths<PairedStats>(mc.n_paths, mc.workers, make, map), kind);
}

// Largest |int_{t0}^t f dW| over grid times in [t0, T] and the dt-integral of f^2.
std::pair<double, double> running_sup(const IntegrandOnGrid& f, const BrownianPath& path, double t0, double T) {
  const Window w = window(path, t0, T);
  double running = 0.0, sup = 0.0, energy = 0.0;
  for (std::size_t j = w.first; j < w.last; ++j) {
    running += f.values[j] * path.dw(j);
    sup = std::max(sup, std::abs(running));
    energy += f.values[j] * f.values[j] * path.dt();
  }
  return {sup, energy};
}

}  // namespace

double ito_integral(const IntegrandOnGrid& f, const BrownianPath& path, double a, double b, int component) {
  check_integrand(f, path);
  const Window w = window(path, a, b);
  double sum = 0.0;
  for (std::size_t j = w.first; j < w.last; ++j) sum += f.values[j] * path.dw(j, component);
  return sum;
}

Vector ito_integral(const MatrixIntegrandOnGrid& f, const BrownianPath& path, double a, double b) {
  if (f.values.size() != path.nodes()) throw ValidationError("integrand length does not match the path grid");
  const Window w = window(path, a, b);
  const Eigen::Index n = f.values.front().rows();
  Vector sum = Vector::Zero(n);
  Vector dw(path.m());
  for (std::size_t j = w.first; j < w.last; ++j) {
    if (f.values[j].cols() != path.m()) throw ValidationError("integrand columns must equal the noise dimension");
    for (int c = 0; c < path.m(); ++c) dw[c] = path.dw(j, c);
    sum += f.values[j] * dw;
  }
  return sum;
}

double stratonovich_integral(const IntegrandOnGrid& f, const BrownianPath& path, double a, double b, int component) {
  check_integrand(f, path);
  const Window w = window(path, a, b);
  double sum = 0.0;
  for (std::size_t j = w.first; j < w.last; ++j)
    sum += 0.5 * (f.values[j] + f.values[j + 1]) * path.dw(j, component);
  return sum;
}

namespace integrands {

IntegrandSampler constant(double c) {
  return [c](const BrownianPath& p) { return IntegrandOnGrid{std::vector<double>(p.nodes(), c)}; };
}

IntegrandSampler time() {
  return [](const BrownianPath& p) {
    IntegrandOnGrid f{std::vector<double>(p.nodes())};
    for (std::size_t i = 0; i < p.nodes(); ++i) f.values[i] = p.time(i);
    return f;
  };
}

IntegrandSampler brownian(double scale) {
  return [scale](const BrownianPath& p) {
    IntegrandOnGrid f{std::vector<double>(p.nodes())};
    for (std::size_t i = 0; i < p.nodes(); ++i) f.values[i] = scale * p.w(i);
    return f;
  };
}

}  // namespace integrands

IdentityReport isometry_check(const IntegrandSampler& f, double T, const McConfig& mc) {
  require_paths(mc, 1000);
  return run_check("isometry", mc, T, IdentityReport::Kind::equality, [&](const BrownianPath& path) {
    const IntegrandOnGrid v = f(path);
    check_integrand(v, path);
    check_finite(v);
    const Window w = window(path, 0.0, T);
    double integral = 0.0, energy = 0.0;
    for (std::size_t j = w.first; j < w.last; ++j) {
      integral += v.values[j] * path.dw(j);
      energy += v.values[j] * v.values[j] * path.dt();
    }
    return std::pair{integral * integral, energy};
  });
}

IdentityReport generalized_isometry_check(const IntegrandSampler& f, const IntegrandSampler& g, double a, double b,
                                          const McConfig& mc) {
  require_paths(mc, 1000);
  if (!(a > 0.0 && b > 0.0)) throw ValidationError("generalized_isometry_check: a and b must be positive");
  const double lo = std::min(a, b);
  return run_check("generalized_isometry", mc, std::max(a, b), IdentityReport::Kind::equality,
                   [&](const BrownianPath& path) {
                     const IntegrandOnGrid vf = f(path), vg = g(path);
                     check_integrand(vf, path);
                     check_integrand(vg, path);
                     check_finite(vf);
                     check_finite(vg);
                     const double lhs = ito_integral(vf, path, 0.0, a) * ito_integral(vg, path, 0.0, b);
                     const Window w = window(path, 0.0, lo);
                     double rhs = 0.0;
                     for (std::size_t j = w.first; j < w.last; ++j) rhs += vf.values[j] * vg.values[j] * path.dt();
                     return std::pair{lhs, rhs};
                   });
}

IdentityReport doob_bound_check(const IntegrandSampler& f, double lambda, double t0, double T, const McConfig& mc) {
  if (!(lambda > 0.0)) throw ValidationError("doob_bound_check: lambda must be positive");
  require_paths(mc, 1);
  const double inv = 1.0 / (lambda * lambda);
  return run_check("doob_bound", mc, T, IdentityReport::Kind::upper_bound, [&](const BrownianPath& path) {
    const IntegrandOnGrid v = f(path);
    check_integrand(v, path);
    check_finite(v);
    const auto [sup, energy] = running_sup(v, path, t0, T);
    return std::pair{sup >= lambda ? 1.0 : 0.0, energy * inv};
  });
}

IdentityReport second_moment_sup_check(const IntegrandSampler& f, double t0, double T, const McConfig& mc) {
  require_paths(mc, 1000);
  return run_check("second_moment_sup", mc, T, IdentityReport::Kind::upper_bound, [&](const BrownianPath& path) {
    const IntegrandOnGrid v = f(path);
    check_integrand(v, path);
    check_finite(v);
    const auto [sup, energy] = running_sup(v, path, t0, T);
    return std::pair{sup * sup, 4.0 * energy};
  });
}

double ito_formula_residual(const SdeModel& model, const ScalarObservable& g, const BrownianPath& path,
                            const Vector& x0) {
  if (x0.size() != model.n()) throw ValidationError("ito_formula_residual: x0 dimension does not match model");
  if (g.gradient(0.0, x0).size() != model.n())
    throw ValidationError("ito_formula_residual: observable dimension does not match model");
  const double T = path.t_max();
  const Trajectory traj = euler_maruyama(model, x0, path, 0.0, T);
  const std::size_t first = path.index_of(0.0);
  const double dt = path.dt();

  double formula = g.value(0.0, x0);
  Vector dw(model.m());
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double t = traj.times[k];
    const Vector x = traj.state(k);
    const Matrix s = model.diffusion(t, x);
    for (int c = 0; c < model.m(); ++c) dw[c] = path.dw(first + k, c);
    formula += apply_generator(model, g, x, t) * dt;
    formula += g.gradient(t, x).dot(s * dw);
  }
  return std::abs(g.value(traj.times.back(), traj.terminal()) - formula);
}

double product_rule_residual(const Trajectory& X, const Trajectory& Y, int cx, int cy) {
  if (X.size() != Y.size() || X.size() < 1) throw ValidationError("product_rule_residual: grids differ in length");
  for (std::size_t k = 0; k < X.size(); ++k)
    if (X.times[k] != Y.times[k]) throw ValidationError("product_rule_residual: trajectories do not share a grid");
  const auto x = X.component(cx);
  const auto y = Y.component(cy);
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double dx = x[k + 1] - x[k];
    const double dy = y[k + 1] - y[k];
    sum += x[k] * dy + y[k] * dx + dx * dy;
  }
  return std::abs(x.back() * y.back() - x.front() * y.front() - sum);
}

}  // namespace stokit
