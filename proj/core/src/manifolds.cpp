#include "stokit/manifolds.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "stokit/errors.hpp"
#include "stokit/random.hpp"

namespace stokit {

ManifoldSpec circle_spec(double radius) {
  if (!(radius > 0.0)) throw ValidationError("circle_spec: radius must be positive");
  const double r2 = radius * radius;
  return {"circle(r=" + std::to_string(radius) + ")",
          [r2](const Vector& x) { return x[0] * x[0] + x[1] * x[1] - r2; },
          [](const Vector& x) {
            Vector g(2);
            g << 2.0 * x[0], 2.0 * x[1];
            return g;
          }};
}

ManifoldSpec ellipse_spec(double c) {
  return {"x^2+2y^2-" + std::to_string(c), [c](const Vector& x) { return x[0] * x[0] + 2.0 * x[1] * x[1] - c; },
          [](const Vector& x) {
            Vector g(2);
            g << 2.0 * x[0], 4.0 * x[1];
            return g;
          }};
}

ManifoldSpec scaled(const ManifoldSpec& spec, double lambda) {
  return {spec.label + "*" + std::to_string(lambda), [spec, lambda](const Vector& x) { return lambda * spec.G(x); },
          [spec, lambda](const Vector& x) -> Vector { return lambda * spec.grad(x); }};
}

void validate_manifold(const ManifoldSpec& spec, const std::vector<Vector>& probes) {
  if (!spec.G || !spec.grad) throw ValidationError("manifold '" + spec.label + "': G and grad are required");
  for (const Vector& x : probes) {
    const Vector g = spec.grad(x);
    if (g.size() != x.size()) throw ValidationError("manifold '" + spec.label + "': gradient has wrong length");
    Vector fd(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x[i]));
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      fd[i] = (spec.G(xp) - spec.G(xm)) / (2.0 * h);
    }
    if ((g - fd).norm() > 1e-5 * std::max(1.0, g.norm()))
      throw ValidationError("manifold '" + spec.label + "': gradient disagrees with finite differences");
    if (std::abs(spec.G(x)) < 1e-8 && g.norm() == 0.0)
      throw ValidationError("manifold '" + spec.label + "': gradient vanishes on the zero set");
  }
}

TangencyResidual tangency_residual(const SdeModel& model, const ManifoldSpec& spec, const Vector& x, double t) {
  if (x.size() != model.n() || !x.allFinite()) throw ValidationError("tangency_residual: bad state");
  const Vector mu = ito_to_stratonovich_drift(model, x, t);  // b - (1/2) sum D sigma^j sigma^j
  const Vector g = spec.grad(x);
  const Matrix S = model.diffusion(t, x);
  TangencyResidual r;
  r.r_mu = mu.dot(g);
  r.r_sigma = S.transpose() * g;
  return r;
}

double tangency_tolerance(const SdeModel& model) {
  return model.jacobian_source() == JacobianSource::analytic ? 1e-10 : 1e-6;
}

namespace {

struct State {
  Vector x;
  double u;
};

State rk4_step(const CharacteristicField& f, const State& s, double h) {
  auto rhs = [&](const Vector& x, double u) { return std::make_pair(f.a(x), f.c(x, u)); };
  const auto [k1x, k1u] = rhs(s.x, s.u);
  const auto [k2x, k2u] = rhs(s.x + 0.5 * h * k1x, s.u + 0.5 * h * k1u);
  const auto [k3x, k3u] = rhs(s.x + 0.5 * h * k2x, s.u + 0.5 * h * k2u);
  const auto [k4x, k4u] = rhs(s.x + h * k3x, s.u + h * k3u);
  return {s.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x), s.u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)};
}

bool inside(const std::optional<BoundingBox>& box, const Vector& x) {
  if (!box) return true;
  return (x.array() >= box->lo.array()).all() && (x.array() <= box->hi.array()).all();
}

void check_field(const CharacteristicField& f) {
  if (f.n < 1) throw ValidationError("characteristic field: n must be positive");
  if (!f.a || !f.c || !f.gamma0) throw ValidationError("characteristic field: a, c and gamma0 are required");
}

}  // namespace

CharacteristicSurface characteristics_solve(const CharacteristicField& field, const std::vector<Vector>& s_grid,
                                            std::pair<double, double> t_span, double dt,
                                            const std::optional<BoundingBox>& box) {
  check_field(field);
  if (s_grid.empty()) throw ValidationError("characteristics_solve: empty s grid");
  if (!(dt > 0.0)) throw ValidationError("characteristics_solve: dt must be positive");
  const double length = t_span.second - t_span.first;
  const auto steps = static_cast<std::size_t>(std::llround(std::abs(length) / dt));
  if (steps == 0) throw ValidationError("characteristics_solve: t span shorter than dt");
  const double h = length / static_cast<double>(steps);
  if (box && (box->lo.size() != field.n || box->hi.size() != field.n))
    throw ValidationError("characteristics_solve: bounding box has wrong dimension");

  CharacteristicSurface surf;
  surf.n = field.n;
  for (const Vector& s : s_grid) {
    if (s.size() != field.n - 1) throw ValidationError("characteristics_solve: s has wrong dimension");
    auto [x0, u0] = field.gamma0(s);
    if (x0.size() != field.n) throw ValidationError("characteristics_solve: gamma0 returned wrong dimension");
    CharacteristicCurve curve;
    curve.s = s;
    std::vector<Vector> xs{x0};
    curve.t.push_back(t_span.first);
    curve.u.push_back(u0);
    State st{x0, u0};
    for (std::size_t k = 1; k <= steps; ++k) {
      st = rk4_step(field, st, h);
      if (!inside(box, st.x) || !st.x.allFinite() || !std::isfinite(st.u)) {
        curve.truncated = true;
        break;
      }
      xs.push_back(st.x);
      curve.t.push_back(t_span.first + static_cast<double>(k) * h);
      curve.u.push_back(st.u);
    }
    curve.x.resize(field.n, static_cast<Eigen::Index>(xs.size()));
    for (std::size_t k = 0; k < xs.size(); ++k) curve.x.col(static_cast<Eigen::Index>(k)) = xs[k];
    surf.curves.push_back(std::move(curve));
  }
  return surf;
}

NoncharacteristicReport noncharacteristic_check(const CharacteristicField& field, const std::vector<Vector>& s_grid,
                                                double threshold) {
  check_field(field);
  const int n = field.n;
  NoncharacteristicReport rep;
  for (std::size_t idx = 0; idx < s_grid.size(); ++idx) {
    const Vector& s = s_grid[idx];
    if (s.size() != n - 1) throw ValidationError("noncharacteristic_check: s has wrong dimension");
    Matrix M(n + 1, n);
    for (int j = 0; j < n - 1; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(s[j]));
      Vector sp = s, sm = s;
      sp[j] += h;
      sm[j] -= h;
      const auto [xp, up] = field.gamma0(sp);
      const auto [xm, um] = field.gamma0(sm);
      Vector tangent(n + 1);
      tangent.head(n) = (xp - xm) / (2.0 * h);
      tangent[n] = (up - um) / (2.0 * h);
      const double len = tangent.norm();
      if (!(len > 1e-12)) throw ValidationError("noncharacteristic_check: degenerate tangent of Gamma0");
      M.col(j) = tangent / len;
    }
    const auto [x, u] = field.gamma0(s);
    Vector dir(n + 1);
    dir.head(n) = field.a(x);
    dir[n] = field.c(x, u);
    const double len = dir.norm();
    double sv = 0.0;
    if (len > 0.0) {
      M.col(n - 1) = dir / len;
      sv = Eigen::JacobiSVD<Matrix>(M).singularValues().minCoeff();
    }
    rep.least_singular_value.push_back(sv);
    if (!(sv > threshold)) {
      rep.pass = false;
      rep.failing.push_back(idx);
    }
  }
  return rep;
}

ZeroSet extract_zero_set(const CharacteristicSurface& surface) {
  ZeroSet z;
  auto emit = [&](const Vector& a, double ua, const Vector& b, double ub) {
    const double w = ua / (ua - ub);
    z.points.push_back(a + w * (b - a));
  };
  for (const auto& c : surface.curves) {
    for (std::size_t k = 0; k < c.u.size(); ++k) {
      if (c.u[k] == 0.0) z.points.push_back(c.x.col(static_cast<Eigen::Index>(k)));
      else if (k + 1 < c.u.size() && c.u[k] * c.u[k + 1] < 0.0)
        emit(c.x.col(static_cast<Eigen::Index>(k)), c.u[k], c.x.col(static_cast<Eigen::Index>(k + 1)), c.u[k + 1]);
    }
  }
  if (surface.n == 2) {
    for (std::size_t i = 0; i + 1 < surface.curves.size(); ++i) {
      const auto& c0 = surface.curves[i];
      const auto& c1 = surface.curves[i + 1];
      const std::size_t len = std::min(c0.u.size(), c1.u.size());
      for (std::size_t k = 0; k < len; ++k)
        if (c0.u[k] * c1.u[k] < 0.0)
          emit(c0.x.col(static_cast<Eigen::Index>(k)), c0.u[k], c1.x.col(static_cast<Eigen::Index>(k)), c1.u[k]);
    }
  }
  if (z.points.empty())
    z.notice = "no sign change of u on any characteristic: the initial data did not reach the plane u = 0";
  return z;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

InvarianceReport manifold_invariance_mc(const SdeModel& model, const ManifoldSpec& spec, const Vector& x0,
                                        std::size_t n_paths, double dt, double T, std::uint64_t master_seed,
                                        int halvings, Scheme scheme, int workers) {
  if (std::abs(spec.G(x0)) > 1e-10) throw ValidationError("manifold_invariance_mc: x0 is not on the manifold");
  if (n_paths == 0) throw ValidationError("manifold_invariance_mc: need at least one path");
  if (halvings < 1) throw ValidationError("manifold_invariance_mc: need at least one halving");
  if (!(dt > 0.0) || !(T > 0.0)) throw ValidationError("manifold_invariance_mc: dt and T must be positive");
  const PathSolver solver = scheme_solver(model, scheme);
  const double fine = dt / std::ldexp(1.0, halvings);
  const auto levels = static_cast<std::size_t>(halvings) + 1;

  // [level][path]
  std::vector<std::vector<double>> max_g(levels, std::vector<double>(n_paths));
  std::vector<std::vector<double>> end_g(levels, std::vector<double>(n_paths));
  for_each_block(n_paths, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const BrownianPath finest = sample_path(derive_seed(master_seed, i), model.m(), 0.0, T, fine);
      for (std::size_t l = 0; l < levels; ++l) {
        const std::size_t factor = std::size_t{1} << (levels - 1 - l);
        const BrownianPath path = factor == 1 ? finest : finest.coarsen(factor);
        const Trajectory traj = solver(path, x0, 0.0, path.t_max());
        double mx = 0.0;
        for (std::size_t k = 0; k < traj.size(); ++k) mx = std::max(mx, std::abs(spec.G(traj.state(k))));
        max_g[l][i] = mx;
        end_g[l][i] = std::abs(spec.G(traj.terminal()));
      }
    }
  });

  InvarianceReport rep;
  rep.manifold = spec.label;
  rep.n_paths = n_paths;
  for (std::size_t l = 0; l < levels; ++l) {
    InvarianceLevel lv;
    lv.dt = dt / std::ldexp(1.0, static_cast<int>(l));
    lv.median_max_abs_g = median(max_g[l]);
    double sum = 0.0;
    for (double v : max_g[l]) sum += v;
    lv.mean_max_abs_g = sum / static_cast<double>(n_paths);
    lv.median_terminal_abs_g = median(end_g[l]);
    rep.levels.push_back(lv);
  }
  for (std::size_t l = 0; l + 1 < levels; ++l)
    rep.halving_factors.push_back(rep.levels[l].median_max_abs_g / rep.levels[l + 1].median_max_abs_g);
  return rep;
}

ReducedTrajectory restrict_circle(const SdeModel& model, double theta0, const BrownianPath& path, double T) {
  if (model.label() != "circle_manifold")
    throw CapabilityError("restrict_circle: only the builtin circle_manifold model has a reduced form");
  if (!(T > 0.0)) throw ValidationError("restrict_circle: T must be positive");
  const std::size_t first = path.index_of(0.0), last = path.index_of(T);
  ReducedTrajectory r;
  r.lifted.label = "circle_manifold(reduced)";
  r.lifted.seed = path.seed();
  const std::size_t count = last - first + 1;
  r.lifted.states.resize(2, static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const double th = theta0 + path.w(first + k);
    r.theta.push_back(th);
    r.lifted.times.push_back(path.time(first + k));
    r.lifted.states(0, static_cast<Eigen::Index>(k)) = std::cos(th);
    r.lifted.states(1, static_cast<Eigen::Index>(k)) = std::sin(th);
  }
  return r;
}

}  // namespace stokit
