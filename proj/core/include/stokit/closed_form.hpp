#pragma once

#include <functional>
#include <vector>

#include "stokit/brownian.hpp"
#include "stokit/integrators.hpp"
#include "stokit/sde_model.hpp"
#include "stokit/trajectory.hpp"

namespace stokit {

// Exact solutions of the linear example systems, evaluated on a supplied path
// on the grid nodes of [0, T]. Stochastic convolutions with deterministic
// integrands are quadratures on the same grid, so every oracle shares the
// path (and its discretization) with the schemes it is compared against.

// How a stochastic convolution int_0^t k(t - s) dW_s is evaluated.
//   ito_left_point       sum k(t - s_j) dW_j
//   pathwise_left_point  after integration by parts: k(0) W_t + int k'(t - s) W_s ds,
//                        the ds integral by the left-point rule
//   pathwise_trapezoid   same with the trapezoid rule
// The pathwise forms are defined for every path (not only almost surely), which
// is what the cocycle of a random dynamical system is built from.
enum class ConvolutionRule { ito_left_point, pathwise_left_point, pathwise_trapezoid };

struct OUParams {
  double b = 1.0;          // mean reversion rate
  double a = 1.0;          // noise amplitude
  double sigma0_sq = 0.0;  // variance of X_0 ~ N(0, sigma0_sq)
};

// dX = -b X dt + a dW: X_t = e^{-bt} x0 + a int_0^t e^{-b(t-s)} dW_s.
Trajectory ou_solve(const OUParams& params, double x0, const BrownianPath& path, double T,
                    ConvolutionRule rule = ConvolutionRule::ito_left_point);

// Ensemble solver for OU with a random start: X_0 = sqrt(sigma0_sq) Z with Z
// drawn from the path's own seed (probe stream), independent of W. The x0
// passed by the ensemble is ignored.
PathSolver ou_random_start_solver(const OUParams& params, ConvolutionRule rule = ConvolutionRule::ito_left_point);

// Cov(X_s, X_t) for X_0 ~ N(0, sigma0_sq) independent of W. Throws
// ValidationError when b == 0 or s, t < 0.
double ou_covariance(const OUParams& params, double s, double t);
double ou_variance(const OUParams& params, double t);

// dX = r X dt + alpha X dW: X_t = x0 exp((r - alpha^2 / 2) t + alpha W_t).
Trajectory gbm_solve(double r, double alpha, double x0, const BrownianPath& path, double T);

using ScalarCoefficient = std::function<double(double)>;

// dX = (a1 X + a2) dt + (b1 X + b2) dW by the fundamental solution
// Phi_t = exp(int (a1 - b1^2/2) ds + int b1 dW) and variation of constants.
Trajectory linear_scalar_solve(const ScalarCoefficient& a1, const ScalarCoefficient& a2, const ScalarCoefficient& b1,
                               const ScalarCoefficient& b2, double x0, const BrownianPath& path, double T);

struct LinearSystemParams {
  Matrix A;
  std::function<Vector(double)> f;
  std::vector<std::function<Vector(double)>> g;
};

// dX = (A X + f) dt + sum_k g_k dW_k with constant A:
//   X_{k+1} = e^{A dt} X_k + (int_0^dt e^{Au} du) f(t_k) + e^{A dt} sum_c g_c(t_k) dW_c.
// The drift integral is exact for piecewise-constant f; the noise term is the
// left-point convolution.
Trajectory linear_system_solve(const LinearSystemParams& params, const Vector& x0, const BrownianPath& path, double T);

// x'' + k x = h W' with the cos/sin propagator (A^2 = -k I).
Trajectory oscillator_solve(double k, double h, double x0, double y0, const BrownianPath& path, double T);

// e^{At} for A = [[0, 1], [-k, 0]].
Matrix harmonic_propagator(double k, double t);

// Matrix exponential by scaling and squaring with the diagonal (6,6) Pade
// approximant.
Matrix expm(const Matrix& A);

// Exact solver for a builtin model (brownian, circle_manifold, harmonic,
// langevin, linear_scalar, linear_system, oscillator, population), read from
// its label and params. CapabilityError for anything else.
PathSolver exact_solver(const SdeModel& model);
bool has_exact_solver(const SdeModel& model);

// Order-study problems. The OU reference uses the pathwise trapezoid rule.
ClosedFormProblem gbm_problem(double r, double alpha, double x0);
ClosedFormProblem ou_problem(double b, double a, double x0);

}  // namespace stokit
