#include "stokit/sde_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stokit/errors.hpp"
#include "stokit/random.hpp"

namespace stokit {
namespace {

constexpr int kProbeCount = 8;
constexpr std::uint64_t kProbeSeed = 0x5EEDF00Dull;
constexpr double kDerivativeTolerance = 1e-5;

Vector probe_state(int n, int i) {
  Vector x(n);
  for (int k = 0; k < n; ++k) x[k] = 2.0 * uniform_open(kProbeSeed, stream::probe, i, k) - 1.0;
  return x;
}

double fd_step(double xk) { return 1e-6 * (1.0 + std::abs(xk)); }

bool close(double a, double b, double scale) {
  return std::abs(a - b) <= kDerivativeTolerance * std::max(1.0, scale);
}

}  // namespace

std::vector<Matrix> finite_difference_jacobians(const DiffusionFn& sigma, int n, int m, double t,
                                                const Vector& x) {
  std::vector<Matrix> jac(m, Matrix::Zero(n, n));
  Vector xp = x, xm = x;
  for (int k = 0; k < n; ++k) {
    const double h = fd_step(x[k]);
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    const Matrix d = (sigma(t, xp) - sigma(t, xm)) / (2.0 * h);
    for (int j = 0; j < m; ++j) jac[j].col(k) = d.col(j);
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return jac;
}

SdeModel::SdeModel(std::string label, int n, int m, DriftFn drift, DiffusionFn diffusion,
                   JacobianFn jacobians, NoiseStructure noise, Params params)
    : label_(std::move(label)),
      n_(n),
      m_(m),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      jacobians_(std::move(jacobians)),
      jac_source_(jacobians_ ? JacobianSource::analytic : JacobianSource::none),
      noise_(noise),
      params_(std::move(params)) {
  if (n_ < 1 || m_ < 1) throw ValidationError("SdeModel '" + label_ + "': n and m must be positive");
  if (!drift_ || !diffusion_) throw ValidationError("SdeModel '" + label_ + "': drift and diffusion required");
  if (noise_ == NoiseStructure::diagonal && n_ != m_)
    throw ValidationError("SdeModel '" + label_ + "': diagonal noise needs n == m");

  for (int i = 0; i < kProbeCount; ++i) {
    const Vector x = probe_state(n_, i);
    const Vector b = drift_(0.0, x);
    const Matrix s = diffusion_(0.0, x);
    if (b.size() != n_) throw ValidationError("SdeModel '" + label_ + "': drift has wrong length");
    if (s.rows() != n_ || s.cols() != m_)
      throw ValidationError("SdeModel '" + label_ + "': diffusion has wrong shape");
    if (!b.allFinite() || !s.allFinite())
      throw ValidationError("SdeModel '" + label_ + "': non-finite drift or diffusion at a probe state");
    if (jac_source_ == JacobianSource::analytic) {
      const auto given = jacobians_(0.0, x);
      const auto numeric = finite_difference_jacobians(diffusion_, n_, m_, 0.0, x);
      if (static_cast<int>(given.size()) != m_)
        throw ValidationError("SdeModel '" + label_ + "': expected one Jacobian per noise column");
      for (int j = 0; j < m_; ++j) {
        if (given[j].rows() != n_ || given[j].cols() != n_)
          throw ValidationError("SdeModel '" + label_ + "': Jacobian has wrong shape");
        const double scale = given[j].cwiseAbs().maxCoeff();
        for (int r = 0; r < n_; ++r)
          for (int c = 0; c < n_; ++c)
            if (!close(given[j](r, c), numeric[j](r, c), scale)) {
              std::ostringstream msg;
              msg << "SdeModel '" << label_ << "': Jacobian of sigma column " << j
                  << " disagrees with finite differences at entry (" << r << "," << c << ")";
              throw ValidationError(msg.str());
            }
      }
    }
  }
}

std::vector<Matrix> SdeModel::diffusion_jacobians(double t, const Vector& x) const {
  switch (jac_source_) {
    case JacobianSource::analytic:
      return jacobians_(t, x);
    case JacobianSource::finite_difference:
      return finite_difference_jacobians(diffusion_, n_, m_, t, x);
    case JacobianSource::none:
      break;
  }
  throw CapabilityError("model '" + label_ + "' has no diffusion Jacobians");
}

SdeModel SdeModel::with_finite_difference_jacobians() const {
  SdeModel copy = *this;
  if (copy.jac_source_ == JacobianSource::none) copy.jac_source_ = JacobianSource::finite_difference;
  return copy;
}

SdeModel SdeModel::with_params(Params params) const {
  SdeModel copy = *this;
  copy.params_ = std::move(params);
  return copy;
}

SdeModel SdeModel::with_drift(std::string label, DriftFn drift) const {
  SdeModel copy = *this;
  copy.label_ = std::move(label);
  copy.drift_ = std::move(drift);
  return copy;
}

// ---------------------------------------------------------------------------
// Observables

ScalarObservable ScalarObservable::half_norm_squared() {
  return {[](double, const Vector& x) { return 0.5 * x.squaredNorm(); },
          [](double, const Vector& x) -> Vector { return x; },
          [](double, const Vector& x) -> Matrix { return Matrix::Identity(x.size(), x.size()); },
          {}};
}

ScalarObservable ScalarObservable::linear(Vector c, double c0) {
  return {[c, c0](double, const Vector& x) { return c.dot(x) + c0; },
          [c](double, const Vector&) -> Vector { return c; },
          [](double, const Vector& x) -> Matrix { return Matrix::Zero(x.size(), x.size()); },
          {}};
}

ScalarObservable ScalarObservable::square(int k) {
  return {[k](double, const Vector& x) { return x[k] * x[k]; },
          [k](double, const Vector& x) -> Vector {
            Vector g = Vector::Zero(x.size());
            g[k] = 2.0 * x[k];
            return g;
          },
          [k](double, const Vector& x) -> Matrix {
            Matrix h = Matrix::Zero(x.size(), x.size());
            h(k, k) = 2.0;
            return h;
          },
          {}};
}

ScalarObservable ScalarObservable::log_component(int k) {
  return {[k](double, const Vector& x) { return std::log(x[k]); },
          [k](double, const Vector& x) -> Vector {
            Vector g = Vector::Zero(x.size());
            g[k] = 1.0 / x[k];
            return g;
          },
          [k](double, const Vector& x) -> Matrix {
            Matrix h = Matrix::Zero(x.size(), x.size());
            h(k, k) = -1.0 / (x[k] * x[k]);
            return h;
          },
          {}};
}

ScalarObservable ScalarObservable::constant(double c) {
  return {[c](double, const Vector&) { return c; },
          [](double, const Vector& x) -> Vector { return Vector::Zero(x.size()); },
          [](double, const Vector& x) -> Matrix { return Matrix::Zero(x.size(), x.size()); },
          {}};
}

void validate_observable(const ScalarObservable& obs, int n) {
  for (int i = 0; i < kProbeCount; ++i) {
    // Shift probes into (0.5, 1.5) so observables such as ln x stay defined.
    Vector x = probe_state(n, i).array() * 0.5 + 1.0;
    const Vector grad = obs.gradient(0.0, x);
    const Matrix hess = obs.hessian(0.0, x);
    if (grad.size() != n || hess.rows() != n || hess.cols() != n)
      throw ValidationError("observable: gradient/Hessian shape does not match n");
    Vector xp = x, xm = x;
    for (int k = 0; k < n; ++k) {
      const double h = 1e-5 * (1.0 + std::abs(x[k]));
      xp[k] = x[k] + h;
      xm[k] = x[k] - h;
      const double dg = (obs.value(0.0, xp) - obs.value(0.0, xm)) / (2.0 * h);
      const Vector dgrad = (obs.gradient(0.0, xp) - obs.gradient(0.0, xm)) / (2.0 * h);
      xp[k] = x[k];
      xm[k] = x[k];
      if (!close(grad[k], dg, std::abs(grad[k])))
        throw ValidationError("observable: gradient disagrees with finite differences");
      for (int r = 0; r < n; ++r)
        if (!close(hess(r, k), dgrad[r], std::abs(hess(r, k))))
          throw ValidationError("observable: Hessian disagrees with finite differences");
    }
  }
}

double apply_generator(const SdeModel& model, const ScalarObservable& obs, const Vector& x, double t) {
  if (x.size() != model.n()) throw ValidationError("apply_generator: state dimension does not match model");
  const Vector grad = obs.gradient(t, x);
  const Matrix hess = obs.hessian(t, x);
  if (grad.size() != model.n() || hess.rows() != model.n() || hess.cols() != model.n())
    throw ValidationError("apply_generator: observable dimension does not match model");
  const Matrix s = model.diffusion(t, x);
  const double transport = grad.dot(model.drift(t, x));
  const double diffusion = 0.5 * (s * s.transpose()).cwiseProduct(hess).sum();
  return obs.g_t(t, x) + transport + diffusion;
}

Vector noise_induced_drift(const SdeModel& model, double t, const Vector& x) {
  const auto jac = model.diffusion_jacobians(t, x);
  const Matrix s = model.diffusion(t, x);
  Vector c = Vector::Zero(model.n());
  for (int j = 0; j < model.m(); ++j) c += jac[j] * s.col(j);
  return 0.5 * c;
}

SdeModel stratonovich_to_ito(const SdeModel& model) {
  (void)model.diffusion_jacobians(0.0, Vector::Zero(model.n()));  // capability check up front
  return model.with_drift(model.label() + ":ito", [model](double t, const Vector& x) -> Vector {
    return model.drift(t, x) + noise_induced_drift(model, t, x);
  });
}

SdeModel ito_to_stratonovich(const SdeModel& model) {
  (void)model.diffusion_jacobians(0.0, Vector::Zero(model.n()));
  return model.with_drift(model.label() + ":stratonovich", [model](double t, const Vector& x) -> Vector {
    return model.drift(t, x) - noise_induced_drift(model, t, x);
  });
}

Vector ito_to_stratonovich_drift(const SdeModel& model, const Vector& x, double t) {
  if (x.size() != model.n()) throw ValidationError("ito_to_stratonovich_drift: dimension mismatch");
  return model.drift(t, x) - noise_induced_drift(model, t, x);
}

// ---------------------------------------------------------------------------
// Builtin models

namespace models {
namespace {

JacobianFn zero_jacobians(int n, int m) {
  return [n, m](double, const Vector&) { return std::vector<Matrix>(m, Matrix::Zero(n, n)); };
}

}  // namespace

SdeModel langevin(double b, double a) {
  return SdeModel(
      "langevin", 1, 1, [b](double, const Vector& x) -> Vector { return -b * x; },
      [a](double, const Vector&) -> Matrix { return Matrix::Constant(1, 1, a); }, zero_jacobians(1, 1),
      NoiseStructure::additive, {{"b", b}, {"a", a}});
}

SdeModel population(double r, double alpha) {
  return SdeModel(
      "population", 1, 1, [r](double, const Vector& x) -> Vector { return r * x; },
      [alpha](double, const Vector& x) -> Matrix { return Matrix::Constant(1, 1, alpha * x[0]); },
      [alpha](double, const Vector&) { return std::vector<Matrix>{Matrix::Constant(1, 1, alpha)}; },
      NoiseStructure::diagonal, {{"r", r}, {"alpha", alpha}});
}

SdeModel linear_scalar(double a1, double a2, double b1, double b2) {
  return SdeModel(
      "linear_scalar", 1, 1,
      [a1, a2](double, const Vector& x) -> Vector { return Vector::Constant(1, a1 * x[0] + a2); },
      [b1, b2](double, const Vector& x) -> Matrix { return Matrix::Constant(1, 1, b1 * x[0] + b2); },
      [b1](double, const Vector&) { return std::vector<Matrix>{Matrix::Constant(1, 1, b1)}; },
      b1 == 0.0 ? NoiseStructure::additive : NoiseStructure::diagonal,
      {{"a1", a1}, {"a2", a2}, {"b1", b1}, {"b2", b2}});
}

SdeModel linear_scalar(std::function<double(double)> a1, std::function<double(double)> a2,
                       std::function<double(double)> b1, std::function<double(double)> b2) {
  return SdeModel(
      "linear_scalar", 1, 1,
      [a1, a2](double t, const Vector& x) -> Vector { return Vector::Constant(1, a1(t) * x[0] + a2(t)); },
      [b1, b2](double t, const Vector& x) -> Matrix { return Matrix::Constant(1, 1, b1(t) * x[0] + b2(t)); },
      [b1](double t, const Vector&) { return std::vector<Matrix>{Matrix::Constant(1, 1, b1(t))}; },
      NoiseStructure::diagonal);
}

SdeModel linear_system(Matrix A, std::function<Vector(double)> f,
                       std::vector<std::function<Vector(double)>> g) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(g.size());
  if (A.cols() != n) throw ValidationError("linear_system: A must be square");
  if (m < 1) throw ValidationError("linear_system: need at least one noise column");
  return SdeModel(
      "linear_system", n, m, [A, f](double t, const Vector& x) -> Vector { return A * x + f(t); },
      [g, n, m](double t, const Vector&) -> Matrix {
        Matrix s(n, m);
        for (int k = 0; k < m; ++k) s.col(k) = g[k](t);
        return s;
      },
      zero_jacobians(n, m), NoiseStructure::additive);
}

SdeModel linear_system(Matrix A, Vector f, Matrix G) {
  std::vector<std::function<Vector(double)>> g;
  for (int k = 0; k < G.cols(); ++k) {
    Vector col = G.col(k);
    g.push_back([col](double) { return col; });
  }
  if (f.size() != A.rows() || G.rows() != A.rows())
    throw ValidationError("linear_system: f and G must have n rows");
  return linear_system(std::move(A), [f](double) { return f; }, std::move(g));
}

SdeModel oscillator(double a, double b, double sigma) {
  return SdeModel(
      "oscillator", 2, 1,
      [a, b](double, const Vector& x) -> Vector {
        Vector d(2);
        d << x[1], -b * x[0] - a * x[1];
        return d;
      },
      [sigma](double, const Vector&) -> Matrix {
        Matrix s(2, 1);
        s << 0.0, sigma;
        return s;
      },
      zero_jacobians(2, 1), NoiseStructure::additive, {{"a", a}, {"b", b}, {"sigma", sigma}});
}

SdeModel harmonic(double k, double h) {
  return SdeModel(
      "harmonic", 2, 1,
      [k](double, const Vector& x) -> Vector {
        Vector d(2);
        d << x[1], -k * x[0];
        return d;
      },
      [h](double, const Vector&) -> Matrix {
        Matrix s(2, 1);
        s << 0.0, h;
        return s;
      },
      zero_jacobians(2, 1), NoiseStructure::additive, {{"k", k}, {"h", h}});
}

SdeModel lorenz(double r, double s, double b, double eps) {
  const double q = std::sqrt(eps);
  return SdeModel(
      "lorenz", 3, 3,
      [r, s, b](double, const Vector& x) -> Vector {
        Vector d(3);
        d << -s * x[0] + s * x[1], r * x[0] - x[1] - x[0] * x[2], -b * x[2] + x[0] * x[1];
        return d;
      },
      [q](double, const Vector& x) -> Matrix { return (q * x).asDiagonal(); },
      [q](double, const Vector&) {
        std::vector<Matrix> jac(3, Matrix::Zero(3, 3));
        for (int j = 0; j < 3; ++j) jac[j](j, j) = q;
        return jac;
      },
      NoiseStructure::diagonal, {{"r", r}, {"s", s}, {"b", b}, {"eps", eps}});
}

SdeModel circle_manifold() {
  return SdeModel(
      "circle_manifold", 2, 1, [](double, const Vector& x) -> Vector { return -0.5 * x; },
      [](double, const Vector& x) -> Matrix {
        Matrix s(2, 1);
        s << -x[1], x[0];
        return s;
      },
      [](double, const Vector&) {
        Matrix j(2, 2);
        j << 0.0, -1.0, 1.0, 0.0;
        return std::vector<Matrix>{j};
      },
      NoiseStructure::general);
}

SdeModel brownian(int n, double scale) {
  return SdeModel(
      "brownian", n, n, [n](double, const Vector&) -> Vector { return Vector::Zero(n); },
      [n, scale](double, const Vector&) -> Matrix { return scale * Matrix::Identity(n, n); },
      zero_jacobians(n, n), NoiseStructure::additive, {{"n", n}, {"scale", scale}});
}

}  // namespace models

namespace {

double get(const Params& p, const char* key) { return p.at(key); }

std::vector<CatalogEntry> make_catalog() {
  std::vector<CatalogEntry> c = {
      {"brownian", "dX = scale dW in R^n", {{"n", 1}, {"scale", 1.0}},
       [](const Params& p) {
         const double n = get(p, "n");
         if (n < 1 || n != std::floor(n)) throw ValidationError("brownian: n must be a positive integer");
         return models::brownian(static_cast<int>(n), get(p, "scale"));
       }},
      {"circle_manifold", "b = (-x/2, -y/2), sigma = (-y, x)", {},
       [](const Params&) { return models::circle_manifold(); }},
      {"harmonic", "x'' + k x = h W'", {{"k", 1.0}, {"h", 1.0}},
       [](const Params& p) { return models::harmonic(get(p, "k"), get(p, "h")); }},
      {"langevin", "dX = -b X dt + a dW", {{"b", 1.0}, {"a", std::sqrt(2.0)}},
       [](const Params& p) { return models::langevin(get(p, "b"), get(p, "a")); }},
      {"linear_scalar", "dX = (a1 X + a2) dt + (b1 X + b2) dW",
       {{"a1", -1.0}, {"a2", 0.5}, {"b1", 0.3}, {"b2", 0.2}},
       [](const Params& p) {
         return models::linear_scalar(get(p, "a1"), get(p, "a2"), get(p, "b1"), get(p, "b2"));
       }},
      {"linear_system", "dX = (A X + f) dt + g dW in R^2",
       {{"a11", -1.0}, {"a12", 1.0}, {"a21", -1.0}, {"a22", -1.0}, {"f1", 0.0}, {"f2", 0.0}, {"g1", 0.0}, {"g2", 1.0}},
       [](const Params& p) {
         Matrix A(2, 2);
         A << get(p, "a11"), get(p, "a12"), get(p, "a21"), get(p, "a22");
         Vector f(2);
         f << get(p, "f1"), get(p, "f2");
         Matrix G(2, 1);
         G << get(p, "g1"), get(p, "g2");
         return models::linear_system(A, f, G).with_params(p);
       }},
      {"lorenz", "stochastic Lorenz with multiplicative noise sqrt(eps) diag(x, y, z)",
       {{"r", 28.0}, {"s", 10.0}, {"b", 8.0 / 3.0}, {"eps", 0.01}},
       [](const Params& p) { return models::lorenz(get(p, "r"), get(p, "s"), get(p, "b"), get(p, "eps")); }},
      {"oscillator", "x'' + a x' + b x = sigma W'", {{"a", 0.5}, {"b", 1.0}, {"sigma", 1.0}},
       [](const Params& p) { return models::oscillator(get(p, "a"), get(p, "b"), get(p, "sigma")); }},
      {"population", "dX = r X dt + alpha X dW", {{"r", 2.0}, {"alpha", 1.0}},
       [](const Params& p) { return models::population(get(p, "r"), get(p, "alpha")); }},
  };
  std::sort(c.begin(), c.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return c;
}

}  // namespace

const std::vector<CatalogEntry>& builtin_models() {
  static const std::vector<CatalogEntry> catalog = make_catalog();
  return catalog;
}

SdeModel make_builtin(const std::string& name, const Params& overrides) {
  for (const auto& entry : builtin_models()) {
    if (entry.name != name) continue;
    Params p = entry.defaults;
    for (const auto& [key, value] : overrides) {
      if (!p.contains(key)) throw ValidationError("model '" + name + "' has no parameter '" + key + "'");
      p[key] = value;
    }
    return entry.make(p);
  }
  throw LookupError("unknown model '" + name + "'");
}

}  // namespace stokit
