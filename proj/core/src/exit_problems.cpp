#include "stokit/exit_problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "stokit/errors.hpp"
#include "stokit/random.hpp"

namespace stokit {

std::string to_string(Face face) {
  switch (face) {
    case Face::left: return "left";
    case Face::right: return "right";
    case Face::bottom: return "bottom";
    case Face::top: return "top";
  }
  return "?";
}

Face parse_face(const std::string& name) {
  if (name == "left" || name == "lower") return Face::left;
  if (name == "right" || name == "upper") return Face::right;
  if (name == "bottom") return Face::bottom;
  if (name == "top") return Face::top;
  throw ValidationError("unknown boundary face '" + name + "' (expected left, right, bottom, top)");
}

namespace {

std::size_t grid_count(double lo, double hi, double h) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) throw ValidationError("domain: require lo < hi");
  if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("domain: grid spacing must be positive");
  const double cells = (hi - lo) / h;
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells))
    throw ValidationError("domain: grid spacing must divide the side length");
  if (rounded < 2.0) throw ValidationError("domain: need at least one interior node per axis");
  return static_cast<std::size_t>(rounded) + 1;
}

}  // namespace

Domain Domain::interval(double lo, double hi, double h, std::vector<Face> gamma) {
  Domain d;
  d.dim_ = 1;
  d.lo_ = {lo, 0.0};
  d.hi_ = {hi, 0.0};
  d.h_ = {h, 1.0};
  d.count_ = {grid_count(lo, hi, h), 1};
  for (Face f : gamma)
    if (f == Face::bottom || f == Face::top) throw ValidationError("interval domain has only left and right ends");
  d.gamma_faces_ = std::move(gamma);
  d.build_mask();
  return d;
}

Domain Domain::rectangle(std::array<double, 2> lo, std::array<double, 2> hi, std::array<double, 2> h,
                         std::vector<Face> gamma) {
  Domain d;
  d.dim_ = 2;
  d.lo_ = lo;
  d.hi_ = hi;
  d.h_ = h;
  d.count_ = {grid_count(lo[0], hi[0], h[0]), grid_count(lo[1], hi[1], h[1])};
  d.gamma_faces_ = std::move(gamma);
  d.build_mask();
  return d;
}

bool Domain::face_in_gamma(Face face) const {
  return std::find(gamma_faces_.begin(), gamma_faces_.end(), face) != gamma_faces_.end();
}

void Domain::build_mask() {
  std::sort(gamma_faces_.begin(), gamma_faces_.end());
  gamma_faces_.erase(std::unique(gamma_faces_.begin(), gamma_faces_.end()), gamma_faces_.end());
  gamma_mask_.assign(nodes(), false);
  for (std::size_t iy = 0; iy < count_[1]; ++iy) {
    for (std::size_t ix = 0; ix < count_[0]; ++ix) {
      bool g = false;
      if (ix == 0) g |= face_in_gamma(Face::left);
      if (ix + 1 == count_[0]) g |= face_in_gamma(Face::right);
      if (dim_ == 2 && iy == 0) g |= face_in_gamma(Face::bottom);
      if (dim_ == 2 && iy + 1 == count_[1]) g |= face_in_gamma(Face::top);
      gamma_mask_[node(ix, iy)] = g;
    }
  }
}

double Domain::volume() const noexcept {
  double v = hi_[0] - lo_[0];
  if (dim_ == 2) v *= hi_[1] - lo_[1];
  return v;
}

Vector Domain::point(std::size_t n) const {
  Vector x(dim_);
  x[0] = lo_[0] + static_cast<double>(n % count_[0]) * h_[0];
  if (dim_ == 2) x[1] = lo_[1] + static_cast<double>(n / count_[0]) * h_[1];
  return x;
}

bool Domain::is_boundary(std::size_t n) const {
  const std::size_t ix = n % count_[0], iy = n / count_[0];
  if (ix == 0 || ix + 1 == count_[0]) return true;
  return dim_ == 2 && (iy == 0 || iy + 1 == count_[1]);
}

Domain Domain::complement() const {
  std::vector<Face> all = {Face::left, Face::right};
  if (dim_ == 2) {
    all.push_back(Face::bottom);
    all.push_back(Face::top);
  }
  std::vector<Face> rest;
  for (Face f : all)
    if (!face_in_gamma(f)) rest.push_back(f);
  Domain d = *this;
  d.gamma_faces_ = rest;
  d.build_mask();
  // Corners shared by a Gamma face and a non-Gamma face are in both masks;
  // the complement keeps them only where the original did not.
  for (std::size_t n = 0; n < d.nodes(); ++n)
    if (is_boundary(n)) d.gamma_mask_[n] = !gamma_mask_[n];
  return d;
}

bool Domain::contains(const Vector& x) const {
  if (x.size() != dim_) return false;
  for (int a = 0; a < dim_; ++a)
    if (!(x[a] > lo_[a] && x[a] < hi_[a])) return false;
  return true;
}

double GridField::interpolate(const Vector& x) const {
  if (x.size() != domain.dim()) throw ValidationError("GridField::interpolate: dimension mismatch");
  std::array<std::size_t, 2> i0{0, 0};
  std::array<double, 2> w{0.0, 0.0};
  for (int a = 0; a < domain.dim(); ++a) {
    if (x[a] < domain.lo(a) || x[a] > domain.hi(a)) throw RangeError("GridField::interpolate: point outside domain");
    const double s = (x[a] - domain.lo(a)) / domain.h(a);
    const std::size_t cell = std::min(static_cast<std::size_t>(s), domain.count(a) - 2);
    i0[a] = cell;
    w[a] = s - static_cast<double>(cell);
  }
  if (domain.dim() == 1) return (1.0 - w[0]) * at(i0[0]) + w[0] * at(i0[0] + 1);
  return (1.0 - w[0]) * (1.0 - w[1]) * at(i0[0], i0[1]) + w[0] * (1.0 - w[1]) * at(i0[0] + 1, i0[1]) +
         (1.0 - w[0]) * w[1] * at(i0[0], i0[1] + 1) + w[0] * w[1] * at(i0[0] + 1, i0[1] + 1);
}

GeneratorMatrix assemble_generator(const SdeModel& model, const Domain& domain, DriftStencil stencil) {
  const int d = domain.dim();
  if (model.n() != d) throw ValidationError("assemble_generator: model dimension must equal domain dimension");
  const std::size_t N = domain.nodes();

  GeneratorMatrix G;
  std::vector<long> index(N, -1);
  for (std::size_t n = 0; n < N; ++n) {
    if (!domain.is_boundary(n)) {
      index[n] = static_cast<long>(G.interior_nodes.size());
      G.interior_nodes.push_back(n);
    }
  }
  const std::size_t n_int = G.interior_nodes.size();

  using T = Eigen::Triplet<double>;
  std::vector<T> inner, outer;
  std::array<bool, 2> axis_active{false, false};

  for (std::size_t row = 0; row < n_int; ++row) {
    const std::size_t n = G.interior_nodes[row];
    const std::size_t ix = n % domain.count(0), iy = n / domain.count(0);
    const Vector x = domain.point(n);
    const Vector b = model.drift(0.0, x);
    const Matrix S = model.diffusion(0.0, x);
    const Matrix a = S * S.transpose();
    if (!b.allFinite() || !a.allFinite()) throw ValidationError("assemble_generator: non-finite coefficients");

    auto add = [&](std::size_t nb, double v) {
      if (v == 0.0) return;
      if (index[nb] >= 0)
        inner.emplace_back(static_cast<int>(row), static_cast<int>(index[nb]), v);
      else
        outer.emplace_back(static_cast<int>(row), static_cast<int>(nb), v);
    };

    double diag = 0.0;
    bool upwinded = false;
    for (int ax = 0; ax < d; ++ax) {
      const double h = domain.h(ax), D = a(ax, ax), bi = b[ax];
      if (D == 0.0 && bi == 0.0) continue;
      axis_active[ax] = true;
      const std::size_t minus = ax == 0 ? domain.node(ix - 1, iy) : domain.node(ix, iy - 1);
      const std::size_t plus = ax == 0 ? domain.node(ix + 1, iy) : domain.node(ix, iy + 1);
      double cm = D / (2.0 * h * h), cp = cm;
      diag -= D / (h * h);
      const bool upwind =
          bi != 0.0 && (stencil == DriftStencil::upwind || D == 0.0 || 2.0 * std::abs(bi) * h / D > 2.0);
      if (!upwind) {
        cm -= bi / (2.0 * h);
        cp += bi / (2.0 * h);
      } else {
        upwinded = true;
        if (bi > 0.0) cp += bi / h;
        else cm -= bi / h;
        diag -= std::abs(bi) / h;
      }
      add(minus, cm);
      add(plus, cp);
    }

    if (d == 2 && a(0, 1) != 0.0) {
      const double hx = domain.h(0), hy = domain.h(1), axy = std::abs(a(0, 1));
      if (axy / (hx * hy) > a(0, 0) / (hx * hx) || axy / (hx * hy) > a(1, 1) / (hy * hy))
        throw ValidationError("assemble_generator: mixed diffusion term violates diagonal dominance");
      const double c = a(0, 1) / (4.0 * hx * hy);
      add(domain.node(ix + 1, iy + 1), c);
      add(domain.node(ix - 1, iy - 1), c);
      add(domain.node(ix + 1, iy - 1), -c);
      add(domain.node(ix - 1, iy + 1), -c);
    }

    if (diag == 0.0) {
      const Vector p = domain.point(n);
      throw SolverError("assemble_generator: singular operator, node at x = " + std::to_string(p[0]) +
                        " has no coupling (zero diffusion and drift)");
    }
    inner.emplace_back(static_cast<int>(row), static_cast<int>(row), diag);
    if (upwinded) ++G.upwinded_rows;
  }
  for (int ax = 0; ax < d; ++ax)
    if (!axis_active[ax])
      throw SolverError("assemble_generator: singular operator, axis " + std::to_string(ax) +
                        " has zero diffusion and zero drift everywhere");

  G.interior.resize(static_cast<int>(n_int), static_cast<int>(n_int));
  G.interior.setFromTriplets(inner.begin(), inner.end());
  G.boundary.resize(static_cast<int>(n_int), static_cast<int>(N));
  G.boundary.setFromTriplets(outer.begin(), outer.end());
  return G;
}

GridField solve_dirichlet(const GeneratorMatrix& A, const Domain& domain, const std::vector<double>& boundary_values,
                          double rhs) {
  const std::size_t N = domain.nodes();
  if (boundary_values.size() != N) throw ValidationError("solve_dirichlet: boundary data has wrong length");
  const auto n_int = static_cast<Eigen::Index>(A.interior_nodes.size());
  Vector bv = Eigen::Map<const Vector>(boundary_values.data(), static_cast<Eigen::Index>(N));
  for (std::size_t n = 0; n < N; ++n)
    if (!domain.is_boundary(n)) bv[static_cast<Eigen::Index>(n)] = 0.0;
  const Vector r = Vector::Constant(n_int, rhs) - A.boundary * bv;

  constexpr Eigen::Index kDirectLimit = 100000;
  Vector u;
  if (n_int <= kDirectLimit) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(A.interior);
    lu.factorize(A.interior);
    if (lu.info() != Eigen::Success)
      throw SolverError("solve_dirichlet: sparse LU failed (" + lu.lastErrorMessage() + "), " +
                        std::to_string(n_int) + " unknowns");
    u = lu.solve(r);
  } else {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> it;
    it.setTolerance(1e-10);
    it.setMaxIterations(10 * n_int);
    it.compute(A.interior);
    u = it.solve(r);
    if (it.info() != Eigen::Success)
      throw SolverError("solve_dirichlet: BiCGSTAB did not converge, error " + std::to_string(it.error()) +
                        " after " + std::to_string(it.iterations()) + " iterations");
  }
  if (!u.allFinite()) throw SolverError("solve_dirichlet: non-finite solution");

  GridField f{domain, std::vector<double>(N)};
  for (std::size_t n = 0; n < N; ++n) f.values[n] = boundary_values[n];
  for (Eigen::Index i = 0; i < n_int; ++i) f.values[A.interior_nodes[static_cast<std::size_t>(i)]] = u[i];
  return f;
}

GridField escape_probability(const SdeModel& model, const Domain& domain, DriftStencil stencil) {
  std::vector<double> bv(domain.nodes(), 0.0);
  bool any = false;
  for (std::size_t n = 0; n < domain.nodes(); ++n) {
    if (domain.is_boundary(n) && domain.is_gamma(n)) {
      bv[n] = 1.0;
      any = true;
    }
  }
  if (!any) throw ValidationError("escape_probability: Gamma is empty");
  return solve_dirichlet(assemble_generator(model, domain, stencil), domain, bv, 0.0);
}

GridField mean_residence_time(const SdeModel& model, const Domain& domain, DriftStencil stencil) {
  return solve_dirichlet(assemble_generator(model, domain, stencil), domain, std::vector<double>(domain.nodes(), 0.0), -1.0);
}

double average_escape_probability(const GridField& field) {
  const Domain& d = field.domain;
  auto weight = [&](int axis, std::size_t i) {
    if (axis >= d.dim()) return 1.0;
    const bool end = i == 0 || i + 1 == d.count(axis);
    return (end ? 0.5 : 1.0) * d.h(axis);
  };
  double sum = 0.0;
  for (std::size_t iy = 0; iy < d.count(1); ++iy)
    for (std::size_t ix = 0; ix < d.count(0); ++ix) sum += weight(0, ix) * weight(1, iy) * field.at(ix, iy);
  return sum / d.volume();
}

namespace {

struct ExitSample {
  double time = std::numeric_limits<double>::infinity();
  bool gamma = false;
};

// Fraction along the step x -> y at which it leaves through `face`, or +inf.
double crossing_fraction(const Domain& d, const Vector& x, const Vector& y, Face face) {
  const int ax = (face == Face::left || face == Face::right) ? 0 : 1;
  if (ax >= d.dim()) return std::numeric_limits<double>::infinity();
  const bool low = face == Face::left || face == Face::bottom;
  const double wall = low ? d.lo(ax) : d.hi(ax);
  const bool out = low ? y[ax] <= wall : y[ax] >= wall;
  if (!out) return std::numeric_limits<double>::infinity();
  const double span = x[ax] - y[ax];
  return span == 0.0 ? 0.0 : (x[ax] - wall) / span;
}

double distance_to(const Domain& d, const Vector& x, Face face) {
  switch (face) {
    case Face::left: return x[0] - d.lo(0);
    case Face::right: return d.hi(0) - x[0];
    case Face::bottom: return x[1] - d.lo(1);
    case Face::top: return d.hi(1) - x[1];
  }
  return 0.0;
}

std::vector<ExitSample> simulate_exits(const SdeModel& model, const Vector& x0, const Domain& domain,
                                       std::size_t n_paths, double dt, std::uint64_t master_seed,
                                       const ExitOptions& opt) {
  if (model.n() != domain.dim()) throw ValidationError("mc_exit: model dimension must equal domain dimension");
  if (n_paths == 0) throw ValidationError("mc_exit: need at least one path");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("mc_exit: dt must be positive");
  if (!(opt.t_max > 0.0)) throw ValidationError("mc_exit: t_max must be positive");
  if (!domain.contains(x0)) throw ValidationError("mc_exit: x0 must lie strictly inside the domain");

  std::vector<Face> faces = {Face::left, Face::right};
  if (domain.dim() == 2) {
    faces.push_back(Face::bottom);
    faces.push_back(Face::top);
  }
  const int m = model.m();
  const double sqrt_dt = std::sqrt(dt);
  const auto max_steps = static_cast<std::size_t>(std::ceil(opt.t_max / dt));

  std::vector<ExitSample> out(n_paths);
  for_each_block(n_paths, opt.workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    Vector dw(m);
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint64_t seed = derive_seed(master_seed, i);
      Vector x = x0;
      for (std::size_t k = 0; k < max_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        for (int c = 0; c < m; ++c) dw[c] = sqrt_dt * standard_normal(seed, stream::positive_time, k, c);
        const Matrix S = model.diffusion(t, x);
        const Vector y = x + model.drift(t, x) * dt + S * dw;
        if (!y.allFinite()) throw BlowUpError("mc_exit: non-finite state", t + dt);

        double best = std::numeric_limits<double>::infinity();
        bool gamma = false;
        for (Face f : faces) {
          const double frac = crossing_fraction(domain, x, y, f);
          if (frac < best) {
            best = frac;
            gamma = domain.face_in_gamma(f);
          } else if (frac == best && std::isfinite(frac)) {
            gamma = gamma || domain.face_in_gamma(f);
          }
        }
        if (!std::isfinite(best) && opt.bridge_correction) {
          const Matrix a = S * S.transpose();
          for (std::size_t fi = 0; fi < faces.size(); ++fi) {
            const int ax = (faces[fi] == Face::left || faces[fi] == Face::right) ? 0 : 1;
            const double var = a(ax, ax) * dt;
            if (var <= 0.0) continue;
            const double p = std::exp(-2.0 * distance_to(domain, x, faces[fi]) * distance_to(domain, y, faces[fi]) / var);
            if (uniform_open(seed, stream::exit_bridge, k, static_cast<std::uint32_t>(fi)) < p) {
              best = 1.0;
              gamma = domain.face_in_gamma(faces[fi]);
              break;
            }
          }
        }
        if (std::isfinite(best)) {
          out[i] = {t + dt, gamma};
          break;
        }
        x = y;
      }
    }
  });
  return out;
}

ExitStats summarize(const std::vector<ExitSample>& samples) {
  ExitStats s;
  s.n_paths = samples.size();
  s.exit_times.reserve(samples.size());
  s.hit_gamma.reserve(samples.size());
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& e : samples) {
    s.exit_times.push_back(e.time);
    s.hit_gamma.push_back(e.gamma);
    if (!std::isfinite(e.time)) {
      ++s.censored;
      continue;
    }
    sum += e.time;
    sum_sq += e.time * e.time;
    if (e.gamma) ++s.gamma_hits;
  }
  const double n = static_cast<double>(s.n_paths - s.censored);
  if (n > 0) {
    s.mean_exit_time = sum / n;
    s.gamma_probability = static_cast<double>(s.gamma_hits) / n;
  }
  if (n > 1) {
    const double var = std::max(0.0, (sum_sq - n * s.mean_exit_time * s.mean_exit_time) / (n - 1.0));
    s.mean_exit_time_se = std::sqrt(var / n);
    s.gamma_probability_se = std::sqrt(s.gamma_probability * (1.0 - s.gamma_probability) / (n - 1.0));
  }
  return s;
}

double order_statistic(std::vector<double>& v, double q) {
  const auto n = v.size();
  const auto rank = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(q * static_cast<double>(n))));
  auto it = v.begin() + static_cast<std::ptrdiff_t>(std::min(rank, n) - 1);
  std::nth_element(v.begin(), it, v.end());
  return *it;
}

}  // namespace

ExitStats mc_exit(const SdeModel& model, const Vector& x0, const Domain& domain, std::size_t n_paths, double dt,
                  std::uint64_t master_seed, const ExitOptions& options) {
  ExitStats s = summarize(simulate_exits(model, x0, domain, n_paths, dt, master_seed, options));
  if (static_cast<double>(s.censored) > 0.1 * static_cast<double>(s.n_paths))
    throw CensoringError("mc_exit: " + std::to_string(s.censored) + " of " + std::to_string(s.n_paths) +
                         " paths did not exit before t_max");
  return s;
}

double exit_time_quantile(const ExitStats& stats, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("exit_time_quantile: q must lie in (0, 1)");
  if (stats.exit_times.empty()) throw ValidationError("exit_time_quantile: no samples");
  std::vector<double> v = stats.exit_times;
  const double value = order_statistic(v, q);
  if (!std::isfinite(value)) throw CensoringError("exit_time_quantile: quantile falls among censored samples");
  return value;
}

double exit_bias_allowance(const SdeModel& model, const GridField& field, double dt) {
  constexpr double kShift = 0.5826;  // Broadie-Glasserman-Kou continuity correction
  constexpr double kSafety = 1.5;
  const Domain& d = field.domain;
  double a_max = 0.0, grad_max = 0.0;
  for (std::size_t iy = 0; iy < d.count(1); ++iy) {
    for (std::size_t ix = 0; ix < d.count(0); ++ix) {
      const std::size_t n = d.node(ix, iy);
      if (!d.is_boundary(n)) continue;
      const Matrix S = model.diffusion(0.0, d.point(n));
      const Matrix a = S * S.transpose();
      for (int ax = 0; ax < d.dim(); ++ax) a_max = std::max(a_max, a(ax, ax));
      auto inward = [&](std::size_t jx, std::size_t jy, double h) {
        grad_max = std::max(grad_max, std::abs(field.at(jx, jy) - field.values[n]) / h);
      };
      const bool corner2d = d.dim() == 2 && (ix == 0 || ix + 1 == d.count(0)) && (iy == 0 || iy + 1 == d.count(1));
      if (corner2d) continue;
      if (ix == 0) inward(1, iy, d.h(0));
      else if (ix + 1 == d.count(0)) inward(ix - 1, iy, d.h(0));
      else if (iy == 0) inward(ix, 1, d.h(1));
      else inward(ix, iy - 1, d.h(1));
    }
  }
  return kSafety * kShift * std::sqrt(a_max * dt) * grad_max;
}

PredictabilityWindow predictability_window(const SdeModel& model, const Vector& x0, const Domain& domain, double q,
                                           std::size_t n_paths, double dt, std::uint64_t seed,
                                           const ExitOptions& options, std::size_t n_boot, double confidence) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("predictability_window: q must lie in (0, 1)");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("predictability_window: confidence in (0, 1)");
  if (n_boot < 10) throw ValidationError("predictability_window: need at least 10 bootstrap replicates");
  const ExitStats s = summarize(simulate_exits(model, x0, domain, n_paths, dt, seed, options));
  if (static_cast<double>(s.censored) > (1.0 - q) * static_cast<double>(s.n_paths))
    throw CensoringError("predictability_window: censored share exceeds 1 - q, quantile undefined");

  PredictabilityWindow w;
  w.q = q;
  w.n_paths = s.n_paths;
  w.censored = s.censored;
  w.estimate = exit_time_quantile(s, q);

  const std::size_t n = s.n_paths;
  std::vector<double> boot(n_boot), resample(n);
  for (std::size_t b = 0; b < n_boot; ++b) {
    for (std::size_t j = 0; j < n; ++j) {
      const double u = uniform_open(seed, stream::bootstrap, static_cast<std::uint64_t>(b) * n + j, 0);
      resample[j] = s.exit_times[std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)))];
    }
    boot[b] = order_statistic(resample, q);
  }
  const double alpha = 0.5 * (1.0 - confidence);
  w.ci_low = order_statistic(boot, alpha);
  w.ci_high = order_statistic(boot, 1.0 - alpha);
  return w;
}

}  // namespace stokit
