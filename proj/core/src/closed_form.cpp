#include "stokit/closed_form.hpp"

#include <cmath>

#include "stokit/errors.hpp"
#include "stokit/random.hpp"

namespace stokit {
namespace {

struct Grid {
  std::size_t first;
  std::size_t last;
};

Grid grid(const BrownianPath& path, double T) {
  if (!(T > 0.0)) throw ValidationError("closed form: T must be positive");
  return {path.index_of(0.0), path.index_of(T)};
}

void require_origin(double t0) {
  if (t0 != 0.0) throw RangeError("exact solvers start at t0 = 0");
}

Trajectory empty(const std::string& label, const BrownianPath& path, Grid g, int n) {
  Trajectory traj;
  traj.label = label;
  traj.seed = path.seed();
  const std::size_t count = g.last - g.first + 1;
  traj.times.resize(count);
  for (std::size_t k = 0; k < count; ++k) traj.times[k] = path.time(g.first + k);
  traj.states.resize(n, static_cast<Eigen::Index>(count));
  return traj;
}

// y = int_0^t e^{-lambda (t - s)} dW_s on every node, by the chosen rule.
std::vector<double> exponential_convolution(double lambda, const BrownianPath& path, Grid g, ConvolutionRule rule,
                                            int component = 0) {
  const double dt = path.dt();
  const double decay = std::exp(-lambda * dt);
  std::vector<double> y(g.last - g.first + 1, 0.0);
  double integral = 0.0;  // int_0^{t_k} e^{-lambda (t_k - s)} W_s ds for the pathwise rules
  for (std::size_t k = 0; k + 1 < y.size(); ++k) {
    const std::size_t i = g.first + k;
    switch (rule) {
      case ConvolutionRule::ito_left_point:
        y[k + 1] = decay * (y[k] + path.dw(i, component));
        break;
      case ConvolutionRule::pathwise_left_point:
        integral = decay * (integral + path.w(i, component) * dt);
        y[k + 1] = path.w(i + 1, component) - lambda * integral;
        break;
      case ConvolutionRule::pathwise_trapezoid:
        integral = decay * integral + 0.5 * dt * (decay * path.w(i, component) + path.w(i + 1, component));
        y[k + 1] = path.w(i + 1, component) - lambda * integral;
        break;
    }
  }
  return y;
}

}  // namespace

Trajectory ou_solve(const OUParams& params, double x0, const BrownianPath& path, double T, ConvolutionRule rule) {
  const Grid g = grid(path, T);
  Trajectory traj = empty("langevin", path, g, 1);
  const auto conv = exponential_convolution(params.b, path, g, rule);
  for (std::size_t k = 0; k < conv.size(); ++k)
    traj.states(0, static_cast<Eigen::Index>(k)) = std::exp(-params.b * traj.times[k]) * x0 + params.a * conv[k];
  return traj;
}

PathSolver ou_random_start_solver(const OUParams& params, ConvolutionRule rule) {
  if (params.sigma0_sq < 0.0) throw ValidationError("ou_random_start_solver: sigma0_sq must be non-negative");
  return [params, rule](const BrownianPath& path, const Vector&, double t0, double T) {
    require_origin(t0);
    const double x0 = std::sqrt(params.sigma0_sq) * standard_normal(path.seed(), stream::probe, 0, 0);
    return ou_solve(params, x0, path, T, rule);
  };
}

double ou_covariance(const OUParams& p, double s, double t) {
  if (p.b == 0.0) throw ValidationError("ou_covariance: b = 0 is singular");
  if (s < 0.0 || t < 0.0) throw ValidationError("ou_covariance: s and t must be non-negative");
  const double stat = p.a * p.a / (2.0 * p.b);
  return p.sigma0_sq * std::exp(-p.b * (s + t)) + stat * (std::exp(-p.b * std::abs(s - t)) - std::exp(-p.b * (s + t)));
}

double ou_variance(const OUParams& p, double t) { return ou_covariance(p, t, t); }

Trajectory gbm_solve(double r, double alpha, double x0, const BrownianPath& path, double T) {
  if (!(x0 > 0.0)) throw ValidationError("gbm_solve: x0 must be positive");
  const Grid g = grid(path, T);
  Trajectory traj = empty("population", path, g, 1);
  const double mu = r - 0.5 * alpha * alpha;
  for (std::size_t k = 0; k < traj.size(); ++k)
    traj.states(0, static_cast<Eigen::Index>(k)) = x0 * std::exp(mu * traj.times[k] + alpha * path.w(g.first + k));
  return traj;
}

Trajectory linear_scalar_solve(const ScalarCoefficient& a1, const ScalarCoefficient& a2, const ScalarCoefficient& b1,
                               const ScalarCoefficient& b2, double x0, const BrownianPath& path, double T) {
  const Grid g = grid(path, T);
  Trajectory traj = empty("linear_scalar", path, g, 1);
  const double dt = path.dt();
  double exponent = 0.0;  // log Phi_{t_k, 0}
  double bracket = x0;    // x0 + int (a2 - b1 b2) Phi^{-1} ds + int b2 Phi^{-1} dW
  traj.states(0, 0) = x0;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double t = traj.times[k];
    const double inv_phi = std::exp(-exponent);
    const double dw = path.dw(g.first + k);
    const double c1 = b1(t), c2 = b2(t);
    bracket += (a2(t) - c1 * c2) * inv_phi * dt + c2 * inv_phi * dw;
    exponent += (a1(t) - 0.5 * c1 * c1) * dt + c1 * dw;
    traj.states(0, static_cast<Eigen::Index>(k + 1)) = std::exp(exponent) * bracket;
  }
  return traj;
}

Matrix expm(const Matrix& A) {
  if (A.rows() != A.cols()) throw ValidationError("expm: matrix must be square");
  const Eigen::Index n = A.rows();
  // (6,6) Pade coefficients c_k = (12 - k)! 6! / (12! k! (6 - k)!).
  static constexpr double c[7] = {1.0,
                                  1.0 / 2.0,
                                  5.0 / 44.0,
                                  1.0 / 66.0,
                                  1.0 / 792.0,
                                  1.0 / 15840.0,
                                  1.0 / 665280.0};
  const double norm = A.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
  const Matrix X = A / std::ldexp(1.0, squarings);

  const Matrix I = Matrix::Identity(n, n);
  Matrix power = I;
  Matrix num = c[0] * I, den = c[0] * I;
  for (int k = 1; k <= 6; ++k) {
    power = power * X;
    num += c[k] * power;
    den += ((k % 2 == 0) ? c[k] : -c[k]) * power;
  }
  Matrix E = den.partialPivLu().solve(num);
  for (int s = 0; s < squarings; ++s) E = E * E;
  return E;
}

Trajectory linear_system_solve(const LinearSystemParams& params, const Vector& x0, const BrownianPath& path, double T) {
  const Eigen::Index n = params.A.rows();
  if (params.A.cols() != n || x0.size() != n) throw ValidationError("linear_system_solve: dimension mismatch");
  if (static_cast<int>(params.g.size()) != path.m())
    throw ValidationError("linear_system_solve: path noise dimension must equal the number of g_k");
  const Grid g = grid(path, T);
  Trajectory traj = empty("linear_system", path, g, static_cast<int>(n));
  const double dt = path.dt();

  // exp([[A, I], [0, 0]] dt) = [[e^{A dt}, int_0^dt e^{Au} du], [0, I]].
  Matrix aug = Matrix::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = params.A * dt;
  aug.topRightCorner(n, n) = Matrix::Identity(n, n) * dt;
  const Matrix big = expm(aug);
  const Matrix E = big.topLeftCorner(n, n);
  const Matrix P = big.topRightCorner(n, n);

  Vector x = x0;
  traj.states.col(0) = x;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double t = traj.times[k];
    Vector noise = Vector::Zero(n);
    for (int c = 0; c < path.m(); ++c) {
      const Vector gc = params.g[c](t);
      if (gc.size() != n) throw ValidationError("linear_system_solve: g_k has wrong length");
      noise += gc * path.dw(g.first + k, c);
    }
    const Vector f = params.f ? params.f(t) : Vector::Zero(n);
    if (f.size() != n) throw ValidationError("linear_system_solve: f has wrong length");
    x = E * x + P * f + E * noise;
    traj.states.col(static_cast<Eigen::Index>(k + 1)) = x;
  }
  return traj;
}

Matrix harmonic_propagator(double k, double t) {
  if (!(k > 0.0)) throw ValidationError("harmonic_propagator: k must be positive");
  const double w = std::sqrt(k);
  Matrix P(2, 2);
  P << std::cos(w * t), std::sin(w * t) / w, -w * std::sin(w * t), std::cos(w * t);
  return P;
}

Trajectory oscillator_solve(double k, double h, double x0, double y0, const BrownianPath& path, double T) {
  if (!(k > 0.0)) throw ValidationError("oscillator_solve: k must be positive");
  const Grid g = grid(path, T);
  Trajectory traj = empty("harmonic", path, g, 2);
  const double w = std::sqrt(k);
  double cos_sum = 0.0, sin_sum = 0.0;  // sum cos(w s_j) dW_j, sum sin(w s_j) dW_j
  for (std::size_t k_ = 0; k_ < traj.size(); ++k_) {
    const double t = traj.times[k_];
    const double ct = std::cos(w * t), st = std::sin(w * t);
    // sin(w(t - s)) = st cos(ws) - ct sin(ws);  cos(w(t - s)) = ct cos(ws) + st sin(ws)
    const double sin_conv = st * cos_sum - ct * sin_sum;
    const double cos_conv = ct * cos_sum + st * sin_sum;
    traj.states(0, static_cast<Eigen::Index>(k_)) = x0 * ct + y0 / w * st + h / w * sin_conv;
    traj.states(1, static_cast<Eigen::Index>(k_)) = -x0 * w * st + y0 * ct + h * cos_conv;
    if (k_ + 1 < traj.size()) {
      const double dw = path.dw(g.first + k_);
      cos_sum += ct * dw;
      sin_sum += st * dw;
    }
  }
  return traj;
}

namespace {

double param(const SdeModel& model, const char* key) {
  auto it = model.params().find(key);
  if (it == model.params().end())
    throw CapabilityError("exact_solver: model '" + model.label() + "' lacks parameter '" + key + "'");
  return it->second;
}



}  // namespace

bool has_exact_solver(const SdeModel& model) {
  static const char* names[] = {"brownian", "circle_manifold", "harmonic", "langevin",
                                "linear_scalar", "linear_system", "oscillator", "population"};
  for (const char* n : names)
    if (model.label() == n && (model.label() == "circle_manifold" || !model.params().empty())) return true;
  return false;
}

PathSolver exact_solver(const SdeModel& model) {
  if (!has_exact_solver(model))
    throw CapabilityError("no closed-form solver for model '" + model.label() + "'");
  const std::string& name = model.label();

  if (name == "langevin") {
    const OUParams p{param(model, "b"), param(model, "a"), 0.0};
    return [p](const BrownianPath& path, const Vector& x0, double t0, double T) {
      require_origin(t0);
      return ou_solve(p, x0[0], path, T);
    };
  }
  if (name == "population") {
    const double r = param(model, "r"), alpha = param(model, "alpha");
    return [r, alpha](const BrownianPath& path, const Vector& x0, double t0, double T) {
      require_origin(t0);
      return gbm_solve(r, alpha, x0[0], path, T);
    };
  }
  if (name == "linear_scalar") {
    const double a1 = param(model, "a1"), a2 = param(model, "a2"), b1 = param(model, "b1"), b2 = param(model, "b2");
    return [=](const BrownianPath& path, const Vector& x0, double t0, double T) {
      require_origin(t0);
      auto k = [](double v) { return [v](double) { return v; }; };
      return linear_scalar_solve(k(a1), k(a2), k(b1), k(b2), x0[0], path, T);
    };
  }
  if (name == "harmonic") {
    const double k = param(model, "k"), h = param(model, "h");
    return [k, h](const BrownianPath& path, const Vector& x0, double t0, double T) {
      require_origin(t0);
      return oscillator_solve(k, h, x0[0], x0[1], path, T);
    };
  }
  if (name == "oscillator" || name == "linear_system") {
    LinearSystemParams p;
    p.A = Matrix(2, 2);
    Vector f = Vector::Zero(2), g(2);
    if (name == "oscillator") {
      p.A << 0.0, 1.0, -param(model, "b"), -param(model, "a");
      g << 0.0, param(model, "sigma");
    } else {
      p.A << param(model, "a11"), param(model, "a12"), param(model, "a21"), param(model, "a22");
      f << param(model, "f1"), param(model, "f2");
      g << param(model, "g1"), param(model, "g2");
    }
    p.f = [f](double) { return f; };
    p.g = {[g](double) { return g; }};
    return [p, name](const BrownianPath& path, const Vector& x0, double t0, double T) {
      require_origin(t0);
      Trajectory traj = linear_system_solve(p, x0, path, T);
      traj.label = name;
      return traj;
    };
  }
  if (name == "brownian") {
    const double scale = param(model, "scale");
    const int n = model.n();
    return [scale, n](const BrownianPath& path, const Vector& x0, double t0, double T) {
      require_origin(t0);
      const Grid g = grid(path, T);
      Trajectory traj = empty("brownian", path, g, n);
      for (std::size_t k = 0; k < traj.size(); ++k)
        for (int c = 0; c < n; ++c)
          traj.states(c, static_cast<Eigen::Index>(k)) = x0[c] + scale * path.w(g.first + k, c);
      return traj;
    };
  }
  // circle_manifold: X_t is x0 rotated by the angle W_t.
  return [](const BrownianPath& path, const Vector& x0, double t0, double T) {
    require_origin(t0);
    const Grid g = grid(path, T);
    Trajectory traj = empty("circle_manifold", path, g, 2);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double th = path.w(g.first + k);
      traj.states(0, static_cast<Eigen::Index>(k)) = std::cos(th) * x0[0] - std::sin(th) * x0[1];
      traj.states(1, static_cast<Eigen::Index>(k)) = std::sin(th) * x0[0] + std::cos(th) * x0[1];
    }
    return traj;
  };
}

ClosedFormProblem gbm_problem(double r, double alpha, double x0) {
  return {models::population(r, alpha), Vector::Constant(1, x0), [r, alpha, x0](const BrownianPath& path, double T) {
            const double w = path.w(path.index_of(T));
            return Vector::Constant(1, x0 * std::exp((r - 0.5 * alpha * alpha) * T + alpha * w));
          }};
}

ClosedFormProblem ou_problem(double b, double a, double x0) {
  const OUParams p{b, a, 0.0};
  return {models::langevin(b, a), Vector::Constant(1, x0), [p, x0](const BrownianPath& path, double T) {
            return ou_solve(p, x0, path, T, ConvolutionRule::pathwise_trapezoid).terminal();
          }};
}

}  // namespace stokit
