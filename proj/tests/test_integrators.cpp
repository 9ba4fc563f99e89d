#include <gtest/gtest.h>

#include <cmath>

#include "stokit/closed_form.hpp"
#include "stokit/errors.hpp"
#include "stokit/integrators.hpp"
#include "stokit/random.hpp"

using namespace stokit;

namespace {

SdeModel frozen() {
  return SdeModel("frozen", 2, 2, [](double, const Vector&) -> Vector { return Vector::Zero(2); },
                  [](double, const Vector&) -> Matrix { return Matrix::Zero(2, 2); }, {}, NoiseStructure::additive);
}

}  // namespace

TEST(EulerMaruyama, ZeroCoefficientsStayPut) {
  const auto path = sample_path(1, 2, 0.0, 1.0, 0.01);
  Vector x0(2);
  x0 << 0.3, -1.2;
  const auto traj = euler_maruyama(frozen(), x0, path, 0.0, 1.0);
  ASSERT_EQ(traj.size(), 101u);
  for (std::size_t k = 0; k < traj.size(); ++k) EXPECT_EQ(traj.state(k), x0);
}

TEST(EulerMaruyama, PureNoiseTelescopes) {
  const auto path = sample_path(2, 3, -0.5, 1.0, 0.01);
  const Vector x0 = Vector::Constant(3, 0.5);
  const auto traj = euler_maruyama(models::brownian(3, 1.0), x0, path, 0.2, 1.0);
  EXPECT_EQ(traj.state(0), x0);
  for (int c = 0; c < 3; ++c)
    EXPECT_NEAR(traj.terminal()[c] - x0[c], path.w(path.index_of(1.0), c) - path.w(path.index_of(0.2), c), 1e-14);
}

TEST(EulerMaruyama, BlowUpCarriesTime) {
  const auto model = SdeModel("explode", 1, 1, [](double, const Vector& x) -> Vector { return x.cwiseProduct(x); },
                              [](double, const Vector&) -> Matrix { return Matrix::Zero(1, 1); });
  const auto path = sample_path(1, 1, 0.0, 3.0, 0.01);
  try {
    euler_maruyama(model, Vector::Ones(1), path, 0.0, 3.0);
    FAIL() << "expected BlowUpError";
  } catch (const BlowUpError& e) {
    EXPECT_GT(e.time(), 0.9);
    EXPECT_LT(e.time(), 1.5);
  }
}

TEST(EulerMaruyama, RejectsOffWindow) {
  const auto path = sample_path(1, 1, 0.0, 1.0, 0.01);
  EXPECT_THROW(euler_maruyama(models::langevin(1, 1), Vector::Ones(1), path, 0.0, 2.0), RangeError);
  EXPECT_THROW(euler_maruyama(models::langevin(1, 1), Vector::Ones(1), path, 0.0, 0.505), RangeError);
}

TEST(Milstein, AdditiveNoiseMatchesEuler) {
  const auto model = models::oscillator(0.5, 1.0, 0.8);
  const auto path = sample_path(3, 1, 0.0, 2.0, 0.01);
  const Vector x0 = Vector::Ones(2);
  EXPECT_EQ(milstein(model, x0, path, 0.0, 2.0).states, euler_maruyama(model, x0, path, 0.0, 2.0).states);
}

TEST(Milstein, GeneralMultiColumnNoiseUnsupported) {
  const auto model = SdeModel(
      "general2", 2, 2, [](double, const Vector&) -> Vector { return Vector::Zero(2); },
      [](double, const Vector& x) -> Matrix {
        Matrix s(2, 2);
        s << x[1], 1.0, 1.0, x[0];
        return s;
      });
  const auto path = sample_path(3, 2, 0.0, 1.0, 0.01);
  EXPECT_THROW(milstein(model.with_finite_difference_jacobians(), Vector::Ones(2), path, 0.0, 1.0), CapabilityError);
}

TEST(Milstein, CircleDriftShrinksWithDt) {
  const auto model = models::circle_manifold();
  const Vector x0 = Vector::Unit(2, 0);
  double prev = 1e9;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    double sum = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s) {
      const auto path = sample_path(derive_seed(4, s), 1, 0.0, 1.0, dt);
      const auto traj = milstein(model, x0, path, 0.0, 1.0);
      double mx = 0.0;
      for (std::size_t k = 0; k < traj.size(); ++k) mx = std::max(mx, std::abs(traj.state(k).squaredNorm() - 1.0));
      sum += mx;
    }
    EXPECT_LT(sum, prev);
    prev = sum;
  }
}

TEST(Schemes, ParseAndPrint) {
  EXPECT_EQ(parse_scheme("em"), Scheme::euler_maruyama);
  EXPECT_EQ(parse_scheme("milstein"), Scheme::milstein);
  EXPECT_EQ(parse_scheme("exact"), Scheme::exact);
  EXPECT_EQ(to_string(Scheme::euler_maruyama), "euler_maruyama");
  EXPECT_THROW(parse_scheme("rk45"), ValidationError);
  EXPECT_THROW(scheme_solver(models::langevin(1, 1), Scheme::exact), CapabilityError);
}

TEST(Rk4, ExponentialDecay) {
  const auto traj = rk4_flow(models::langevin(1.5, 0.0), Vector::Ones(1), 0.0, 2.0, 0.01);
  EXPECT_NEAR(traj.terminal()[0], std::exp(-3.0), 1e-10);
  const auto fine = rk4_flow(models::langevin(1.5, 0.0), Vector::Ones(1), 0.0, 2.0, 0.01, 10);
  EXPECT_EQ(fine.size(), traj.size());
  EXPECT_NEAR(fine.terminal()[0], std::exp(-3.0), 1e-14);
}

TEST(Ensemble, OuMeanDecays) {
  EnsembleConfig cfg;
  cfg.n_paths = 4000;
  cfg.T = 1.0;
  cfg.dt = 0.01;
  const auto ens = run_ensemble(models::langevin(1.0, std::sqrt(2.0)), Vector::Constant(1, 2.0),
                                Scheme::euler_maruyama, cfg);
  for (std::size_t k = 0; k < ens.times.size(); k += 10) {
    const double se = std::sqrt(ens.var_state(0, k) / 4000.0);
    // EM mean is (1 - dt)^k x0; the exact e^{-t} x0 differs by O(dt).
    EXPECT_NEAR(ens.mean_state(0, k), 2.0 * std::pow(0.99, static_cast<double>(k)), 3.0 * se + 1e-12);
  }
}

TEST(Ensemble, DeterministicAcrossWorkers) {
  EnsembleConfig cfg;
  cfg.n_paths = 300;
  cfg.dt = 0.01;
  cfg.workers = 1;
  const auto model = models::lorenz(28, 10, 8.0 / 3.0, 0.05);
  const Vector x0 = Vector::Ones(3);
  const auto a = run_ensemble(model, x0, Scheme::milstein, cfg);
  cfg.workers = 4;
  const auto b = run_ensemble(model, x0, Scheme::milstein, cfg);
  EXPECT_EQ(a.mean_state, b.mean_state);
  EXPECT_EQ(a.var_state, b.var_state);
  for (const auto& [name, stats] : a.channels) {
    EXPECT_EQ(stats.mean, b.channel(name).mean) << name;
    EXPECT_EQ(stats.se, b.channel(name).se) << name;
  }
}

TEST(Ensemble, SinglePathReproducesTrajectory) {
  EnsembleConfig cfg;
  cfg.n_paths = 1;
  cfg.dt = 0.01;
  cfg.master_seed = 9;
  const auto model = models::population(0.5, 0.4);
  const auto ens = run_ensemble(model, Vector::Ones(1), Scheme::euler_maruyama, cfg);
  const auto traj = euler_maruyama(model, Vector::Ones(1), sample_path(derive_seed(9, 0), 1, 0.0, 1.0, 0.01), 0.0, 1.0);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    EXPECT_EQ(ens.mean_state(0, k), traj.states(0, k));
    EXPECT_NEAR(ens.channel("energy").mean[k], 0.5 * traj.states(0, k) * traj.states(0, k), 1e-15);
  }
}

TEST(Ensemble, MatchesTwoPassMoments) {
  EnsembleConfig cfg;
  cfg.n_paths = 1000;
  cfg.dt = 0.02;
  cfg.master_seed = 5;
  const auto model = models::linear_scalar(-1.0, 0.5, 0.3, 0.2);
  const auto ens = run_ensemble(model, Vector::Ones(1), Scheme::euler_maruyama, cfg);
  const std::size_t nodes = ens.times.size();
  std::vector<std::vector<double>> x(nodes);
  for (std::size_t i = 0; i < cfg.n_paths; ++i) {
    const auto traj =
        euler_maruyama(model, Vector::Ones(1), sample_path(derive_seed(5, i), 1, 0.0, 1.0, cfg.dt), 0.0, 1.0);
    for (std::size_t k = 0; k < nodes; ++k) x[k].push_back(traj.states(0, k));
  }
  for (std::size_t k = 1; k < nodes; ++k) {
    double mean = 0.0;
    for (double v : x[k]) mean += v;
    mean /= 1000.0;
    double var = 0.0;
    for (double v : x[k]) var += (v - mean) * (v - mean);
    var /= 999.0;
    EXPECT_NEAR(ens.mean_state(0, k), mean, 1e-12 * std::abs(mean));
    EXPECT_NEAR(ens.var_state(0, k), var, 1e-12 * var);
  }
}

TEST(Ensemble, TooManyBlowUpsFail) {
  const auto model = SdeModel("explode", 1, 1, [](double, const Vector& x) -> Vector { return x.cwiseProduct(x); },
                              [](double, const Vector&) -> Matrix { return Matrix::Constant(1, 1, 0.1); });
  EnsembleConfig cfg;
  cfg.n_paths = 50;
  cfg.T = 2.0;
  cfg.dt = 0.01;
  EXPECT_THROW(run_ensemble(model, Vector::Ones(1), Scheme::euler_maruyama, cfg), BlowUpError);
}

TEST(Ensemble, UnknownChannel) {
  EnsembleConfig cfg;
  cfg.n_paths = 2;
  cfg.dt = 0.1;
  const auto ens = run_ensemble(models::langevin(1, 1), Vector::Ones(1), Scheme::euler_maruyama, cfg);
  EXPECT_THROW(ens.channel("nope"), LookupError);
}

TEST(StrongOrder, EulerOnGbm) {
  std::vector<double> dts;
  for (int k = 6; k <= 11; ++k) dts.push_back(std::ldexp(1.0, -k));
  const auto study = strong_order_estimate(gbm_problem(0.5, 0.8, 1.0), Scheme::euler_maruyama, dts, 1000, 1.0, 17);
  EXPECT_NEAR(study.slope, 0.5, 0.15);
}

TEST(StrongOrder, MilsteinOnGbm) {
  std::vector<double> dts;
  for (int k = 6; k <= 11; ++k) dts.push_back(std::ldexp(1.0, -k));
  const auto study = strong_order_estimate(gbm_problem(0.5, 0.8, 1.0), Scheme::milstein, dts, 1000, 1.0, 17);
  EXPECT_NEAR(study.slope, 1.0, 0.15);
}

TEST(StrongOrder, EulerOnAdditiveOu) {
  std::vector<double> dts;
  for (int k = 4; k <= 9; ++k) dts.push_back(std::ldexp(1.0, -k));
  const auto study = strong_order_estimate(ou_problem(1.0, 1.0, 1.0), Scheme::euler_maruyama, dts, 500, 1.0, 3);
  EXPECT_NEAR(study.slope, 1.0, 0.15);
}

TEST(StrongOrder, NeedsThreeStepSizes) {
  EXPECT_THROW(strong_order_estimate(gbm_problem(0.5, 0.8, 1.0), Scheme::euler_maruyama, {0.01, 0.02}, 10, 1.0, 1),
               ValidationError);
}

TEST(FitSlope, ExactLine) {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0}, y{1.0, 3.0, 5.0, 7.0};
  EXPECT_NEAR(fit_slope(x, y), 2.0, 1e-14);
}
