#pragma once

#include <functional>
#include <string>

#include "stokit/brownian.hpp"
#include "stokit/closed_form.hpp"
#include "stokit/integrators.hpp"
#include "stokit/sde_model.hpp"

namespace stokit {

// Solution operator phi(t, omega, x) of a random dynamical system: the state
// at time t >= 0 of the solution started at x at time 0 of `path`, where
// time 0 is the path's own origin (so a shifted path restarts the clock).
struct CocycleSolver {
  std::string label;
  std::function<Vector(double t, const BrownianPath& path, const Vector& x)> phi;

  Vector operator()(double t, const BrownianPath& path, const Vector& x) const;  // phi(0, ., x) = x
};

// dX = a X dt + sigma dW through the closed-form convolution.
CocycleSolver linear_cocycle(double a, double sigma, ConvolutionRule rule = ConvolutionRule::pathwise_left_point);
// A stepping scheme on the path grid.
CocycleSolver scheme_cocycle(const SdeModel& model, Scheme scheme);
// Drift-only flow by RK4 with `substeps` per grid step; ignores the noise.
CocycleSolver deterministic_cocycle(const SdeModel& model, double dt, int substeps = 1);

// |phi(t + s, omega, x) - phi(t, theta_s omega, phi(s, omega, x))| with theta_s
// from wiener_shift. RangeError when the window does not cover [0, t + s].
double cocycle_check(const CocycleSolver& solver, double t, double s, const Vector& x, const BrownianPath& path);

// Y(omega) = int_{-T_trunc}^0 e^{b s} dW_s, the stationary orbit of
// dX = -b X dt + dW, on the path grid. Default rule: left-point Ito sum.
double ou_stationary_orbit(const BrownianPath& path, double b, double T_trunc,
                           ConvolutionRule rule = ConvolutionRule::ito_left_point);

// Truncation giving a tail standard deviation below 1e-8 sqrt(1/(2b)).
double default_truncation(double b);

// |phi(t, omega, Y(omega)) - Y(theta_t omega)| for dX = -b X dt + dW, both
// sides with the same convolution rule.
double stationary_orbit_check(const BrownianPath& path, double b, double t, double T_trunc,
                              ConvolutionRule rule = ConvolutionRule::pathwise_left_point);

}  // namespace stokit
