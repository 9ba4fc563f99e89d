#include "stokit/random_dynamics.hpp"

#include <cmath>

#include "stokit/errors.hpp"

namespace stokit {

Vector CocycleSolver::operator()(double t, const BrownianPath& path, const Vector& x) const {
  if (t < 0.0) throw ValidationError("cocycle: t must be non-negative");
  if (t == 0.0) return x;
  return phi(t, path, x);
}

CocycleSolver linear_cocycle(double a, double sigma, ConvolutionRule rule) {
  const OUParams p{-a, sigma, 0.0};
  return {"linear(a=" + std::to_string(a) + ")", [p, rule](double t, const BrownianPath& path, const Vector& x) {
            return ou_solve(p, x[0], path, t, rule).terminal();
          }};
}

CocycleSolver scheme_cocycle(const SdeModel& model, Scheme scheme) {
  const PathSolver solver = scheme_solver(model, scheme);
  return {model.label() + "/" + to_string(scheme), [solver](double t, const BrownianPath& path, const Vector& x) {
            return solver(path, x, 0.0, t).terminal();
          }};
}

CocycleSolver deterministic_cocycle(const SdeModel& model, double dt, int substeps) {
  return {model.label() + "/rk4", [model, dt, substeps](double t, const BrownianPath&, const Vector& x) {
            return rk4_flow(model, x, 0.0, t, dt, substeps).terminal();
          }};
}

double cocycle_check(const CocycleSolver& solver, double t, double s, const Vector& x, const BrownianPath& path) {
  if (t < 0.0 || s < 0.0) throw ValidationError("cocycle_check: t and s must be non-negative");
  if (path.t_min() > 0.0 || path.t_max() < t + s - 1e-9 * path.dt())
    throw RangeError("cocycle_check: path window does not cover [0, t + s]");
  const Vector direct = solver(t + s, path, x);
  const Vector mid = solver(s, path, x);
  const BrownianPath shifted = wiener_shift(path, s);
  const Vector composed = solver(t, shifted, mid);
  return (direct - composed).norm();
}

double default_truncation(double b) {
  if (!(b > 0.0)) throw ValidationError("default_truncation: b must be positive");
  return 20.0 / b;
}

double ou_stationary_orbit(const BrownianPath& path, double b, double T_trunc, ConvolutionRule rule) {
  if (!(b > 0.0)) throw ValidationError("ou_stationary_orbit: b must be positive");
  if (!(T_trunc > 0.0)) throw ValidationError("ou_stationary_orbit: T_trunc must be positive");
  if (path.t_min() > -T_trunc + 1e-9 * path.dt())
    throw RangeError("ou_stationary_orbit: path window does not reach -T_trunc");
  const std::size_t first = path.index_of(-T_trunc), last = path.index_of(0.0);
  const double dt = path.dt();
  double y = 0.0;
  switch (rule) {
    case ConvolutionRule::ito_left_point:
      for (std::size_t i = first; i < last; ++i) y += std::exp(b * path.time(i)) * path.dw(i);
      return y;
    case ConvolutionRule::pathwise_left_point:
    case ConvolutionRule::pathwise_trapezoid: {
      // W(0) - e^{-bT} W(-T) - b int e^{bs} W_s ds, with W(0) = 0.
      const bool trap = rule == ConvolutionRule::pathwise_trapezoid;
      double integral = 0.0;
      for (std::size_t i = first; i < last; ++i) {
        const double left = std::exp(b * path.time(i)) * path.w(i);
        integral += trap ? 0.5 * (left + std::exp(b * path.time(i + 1)) * path.w(i + 1)) * dt : left * dt;
      }
      y = -std::exp(-b * T_trunc) * path.w(first) - b * integral;
      return y;
    }
  }
  return y;
}

double stationary_orbit_check(const BrownianPath& path, double b, double t, double T_trunc, ConvolutionRule rule) {
  if (t < 0.0) throw ValidationError("stationary_orbit_check: t must be non-negative");
  if (path.t_max() < t - 1e-9 * path.dt()) throw RangeError("stationary_orbit_check: path window does not reach t");
  const double y = ou_stationary_orbit(path, b, T_trunc, rule);
  const CocycleSolver phi = linear_cocycle(-b, 1.0, rule);
  const double lhs = phi(t, path, Vector::Constant(1, y))[0];
  const double rhs = ou_stationary_orbit(wiener_shift(path, t), b, T_trunc, rule);
  return std::abs(lhs - rhs);
}

}  // namespace stokit
