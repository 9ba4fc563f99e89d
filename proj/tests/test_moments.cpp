#include <gtest/gtest.h>

#include <cmath>

#include "stokit/errors.hpp"
#include "stokit/moments.hpp"

using namespace stokit;

namespace {

EnsembleConfig config(std::size_t n, double T, double dt, std::uint64_t seed = 42) {
  EnsembleConfig c;
  c.n_paths = n;
  c.T = T;
  c.dt = dt;
  c.master_seed = seed;
  return c;
}

SdeModel scalar(double drift_coef, double sigma) {
  return SdeModel(
      "scalar", 1, 1, [drift_coef](double, const Vector& x) -> Vector { return drift_coef * x; },
      [sigma](double, const Vector&) -> Matrix { return Matrix::Constant(1, 1, sigma); }, {}, NoiseStructure::additive);
}

}  // namespace

TEST(EnergyBalance, DeterministicDecay) {
  const auto model = scalar(-1.0, 0.0);
  const auto ens = run_ensemble(model, Vector::Constant(1, 2.0), Scheme::euler_maruyama, config(3, 2.0, 1e-3));
  const auto s = energy_balance_residual(model, ens);
  for (std::size_t k = 0; k < s.times.size(); k += 100) {
    EXPECT_NEAR(s.energy.mean[k], 2.0 * std::exp(-2.0 * s.times[k]), 5e-3 * 2.0);
    EXPECT_EQ(s.energy.se[k], 0.0);
    // Scheme and difference errors are O(dt) relative to the energy.
    EXPECT_LE(std::abs(s.residual.mean[k]), 4.0 * 1e-3 * 2.0 * s.energy.mean[k] + 1e-12);
  }
}

TEST(EnergyBalance, PureDiffusionGrowsLinearly) {
  const int n = 3;
  const auto model = models::brownian(n, 1.0);
  const Vector x0 = Vector::Constant(n, 0.5);
  const auto ens = run_ensemble(model, x0, Scheme::euler_maruyama, config(4000, 1.0, 1e-2));
  const auto s = energy_balance_residual(model, ens);
  const double e0 = 0.5 * x0.squaredNorm();
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    EXPECT_NEAR(s.energy.mean[k] - e0, n * s.times[k] / 2.0, 3.0 * s.energy.se[k] + 1e-12);
    // Constant sigma: the noise term is exact.
    EXPECT_DOUBLE_EQ(s.noise_term.mean[k], n / 2.0);
    EXPECT_EQ(s.noise_term.se[k], 0.0);
  }
  EXPECT_GE(fraction_within(s.residual), 0.95);
}

TEST(EnergyBalance, AllZero) {
  const auto model = scalar(0.0, 0.0);
  const auto ens = run_ensemble(model, Vector::Zero(1), Scheme::euler_maruyama, config(10, 1.0, 0.1));
  const auto s = energy_balance_residual(model, ens);
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    EXPECT_EQ(s.energy.mean[k], 0.0);
    EXPECT_EQ(s.drift_term.mean[k], 0.0);
    EXPECT_EQ(s.noise_term.mean[k], 0.0);
    EXPECT_EQ(s.residual.mean[k], 0.0);
  }
}

TEST(EnergyBalance, OuResidualWithinNoise) {
  const auto model = models::langevin(1.0, std::sqrt(2.0));
  const auto ens = run_ensemble(model, Vector::Constant(1, 1.0), Scheme::euler_maruyama, config(4000, 1.0, 1e-2));
  EXPECT_GE(fraction_within(energy_balance_residual(model, ens).residual), 0.95);
}

TEST(EnergyBalance, NeedsThreeNodes) {
  const auto model = scalar(-1.0, 1.0);
  const auto ens = run_ensemble(model, Vector::Zero(1), Scheme::euler_maruyama, config(10, 0.1, 0.1));
  EXPECT_THROW(energy_balance_residual(model, ens), ValidationError);
}

TEST(ErrorGrowth, NoNoiseOnlyDiscretizationGap) {
  const auto model = scalar(-1.0, 0.0);
  double prev = 1e9;
  for (double dt : {1e-2, 5e-3}) {
    const auto s = error_growth_series(model, Vector::Ones(1), Vector::Ones(1), Scheme::euler_maruyama,
                                       config(2, 1.0, dt));
    double mx = 0.0;
    for (double v : s.half_mse.mean) mx = std::max(mx, v);
    EXPECT_LT(mx, 1e-4);
    EXPECT_LT(mx, prev);
    prev = mx;
  }
}

TEST(ErrorGrowth, PureDiffusionOfError) {
  const double eps = 0.04;
  const int n = 2;
  const auto model = models::brownian(n, std::sqrt(eps));
  const auto s = error_growth_series(model, Vector::Ones(n), Vector::Ones(n), Scheme::euler_maruyama,
                                     config(4000, 1.0, 1e-2));
  EXPECT_EQ(s.half_mse.mean[0], 0.0);
  for (std::size_t k = 0; k < s.times.size(); ++k)
    EXPECT_NEAR(s.half_mse.mean[k], n * eps * s.times[k] / 2.0, 3.0 * s.half_mse.se[k] + 1e-15);
  EXPECT_GE(fraction_within(s.residual), 0.95);
}

TEST(ErrorGrowth, OuStationaryLevel) {
  const double eps = 0.02;
  const auto s = error_growth_series(scalar(-1.0, std::sqrt(eps)), Vector::Ones(1), Vector::Ones(1),
                                     Scheme::euler_maruyama, config(4000, 6.0, 1e-2));
  const std::size_t k = s.times.size() - 1;
  // E|U|^2 settles at a^2 / (2b) = eps / 2.
  EXPECT_NEAR(2.0 * s.half_mse.mean[k], eps / 2.0, 3.0 * 2.0 * s.half_mse.se[k] + 1e-2 * eps);
}

TEST(ErrorGrowth, InitialMismatch) {
  EXPECT_THROW(error_growth_series(scalar(-1.0, 0.1), Vector::Ones(1), Vector::Zero(1), Scheme::euler_maruyama,
                                   config(10, 1.0, 0.1)),
               ValidationError);
}

TEST(Lorenz, Coefficient) {
  LorenzParams p;
  EXPECT_NEAR(lorenz_energy_coefficient(p), 36.01, 1e-12);
  LorenzParams q = p;
  q.eps = 0.02;
  EXPECT_NEAR(lorenz_energy_coefficient(q) - lorenz_energy_coefficient(p), 0.01, 1e-12);
}

TEST(Lorenz, EnergyBoundHolds) {
  const auto rep = lorenz_energy_bound_check({}, Vector::Ones(3), config(1000, 1.0, 1e-3));
  EXPECT_TRUE(rep.pass()) << rep.violations << " of " << rep.nodes;
  EXPECT_EQ(rep.nodes, 1000u);
}

TEST(Lorenz, EnergyBoundFromOrigin) {
  const auto rep = lorenz_energy_bound_check({}, Vector::Zero(3), config(1000, 0.5, 1e-3));
  EXPECT_TRUE(rep.pass());
}

TEST(Lorenz, DeterministicEnergyBound) {
  LorenzParams p;
  p.eps = 0.0;
  const auto rep = lorenz_energy_bound_check(p, Vector::Ones(3), config(1000, 1.0, 1e-3));
  EXPECT_TRUE(rep.pass());
}

TEST(Lorenz, ErrorBoundNeedsNoiseSource) {
  const auto cfg = config(1000, 0.5, 1e-3);
  const auto stated = lorenz_error_bound_check({}, Vector::Ones(3), cfg, ErrorBoundForm::as_stated);
  EXPECT_FALSE(stated.pass());
  // The violations sit where E|U|^2 is still small.
  EXPECT_LT(stated.times[stated.violating_nodes.front() - 1], 0.05);
  const auto fixed = lorenz_error_bound_check({}, Vector::Ones(3), cfg, ErrorBoundForm::with_noise_source);
  EXPECT_TRUE(fixed.pass()) << fixed.violations;
}

TEST(Lorenz, SmallEnsembleRejected) {
  EXPECT_THROW(lorenz_energy_bound_check({}, Vector::Ones(3), config(999, 1.0, 1e-3)), ValidationError);
  EXPECT_THROW(lorenz_error_bound_check({}, Vector::Ones(3), config(10, 1.0, 1e-3)), ValidationError);
}
