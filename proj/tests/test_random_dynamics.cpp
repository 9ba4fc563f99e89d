#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "sample_stats.hpp"
#include "stokit/errors.hpp"
#include "stokit/random_dynamics.hpp"

using namespace stokit;

namespace {

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Cocycle, IdentityAtZero) {
  const auto path = sample_path(1, 1, -1.0, 2.0, 1e-2);
  const Vector x = Vector::Constant(1, 0.7);
  for (const auto& solver : {linear_cocycle(1.0, 1.0), linear_cocycle(1.0, 1.0, ConvolutionRule::ito_left_point),
                             scheme_cocycle(models::langevin(1.0, 1.0), Scheme::euler_maruyama),
                             deterministic_cocycle(models::langevin(1.0, 0.0), 1e-2, 2)}) {
    EXPECT_EQ(solver(0.0, path, x), x) << solver.label;
    EXPECT_EQ(cocycle_check(solver, 0.0, 0.5, x, path), 0.0) << solver.label;
    EXPECT_EQ(cocycle_check(solver, 0.5, 0.0, x, path), 0.0) << solver.label;
    EXPECT_THROW(solver(-0.1, path, x), ValidationError);
  }
}

TEST(Cocycle, ClosedFormFirstOrder) {
  const auto solver = linear_cocycle(1.0, 1.0);
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto coarse = sample_path(seed, 1, 0.0, 1.0, 2e-3);
    const auto fine = refine(coarse, 2);
    const double a = cocycle_check(solver, 0.5, 0.5, Vector::Constant(1, 0.3), coarse);
    const double b = cocycle_check(solver, 0.5, 0.5, Vector::Constant(1, 0.3), fine);
    EXPECT_LE(a, 10.0 * 2e-3);
    ratios.push_back(a / b);
  }
  const double order = std::log2(median(ratios));
  EXPECT_GE(order, 0.9);
  EXPECT_LE(order, 1.2);
}

TEST(Cocycle, DeterministicRk4) {
  const auto model = models::lorenz(28.0, 10.0, 8.0 / 3.0, 0.0);
  const auto path = sample_path(2, 3, 0.0, 1.0, 1e-3);
  const auto solver = deterministic_cocycle(model, 1e-3);
  EXPECT_LE(cocycle_check(solver, 0.4, 0.6, Vector::Ones(3), path), 1e-8);
}

TEST(Cocycle, WindowOverrun) {
  const auto path = sample_path(3, 1, 0.0, 1.0, 1e-2);
  EXPECT_THROW(cocycle_check(linear_cocycle(1.0, 1.0), 0.6, 0.6, Vector::Zero(1), path), RangeError);
}

TEST(StationaryOrbit, TailBound) {
  EXPECT_DOUBLE_EQ(default_truncation(1.0), 20.0);
  EXPECT_DOUBLE_EQ(default_truncation(4.0), 5.0);
  const double T = default_truncation(1.0);
  EXPECT_NEAR(std::exp(-2.0 * T) / 2.0, 2.1242e-18, 1e-22);
  EXPECT_LT(std::sqrt(std::exp(-2.0 * T) / 2.0), 1e-8 * std::sqrt(0.5));
}

TEST(StationaryOrbit, ZeroPath) {
  const auto path = BrownianPath::from_values(0.01, 2000, 1, std::vector<double>(3001, 0.0));
  EXPECT_EQ(ou_stationary_orbit(path, 1.0, 20.0), 0.0);
  EXPECT_EQ(ou_stationary_orbit(path, 1.0, 20.0, ConvolutionRule::pathwise_left_point), 0.0);
  EXPECT_EQ(stationary_orbit_check(path, 1.0, 5.0, 20.0), 0.0);
}

TEST(StationaryOrbit, Variance) {
  const double b = 2.0, dt = 1e-2;
  std::vector<double> ys;
  for (std::uint64_t seed = 0; seed < 4000; ++seed)
    ys.push_back(ou_stationary_orbit(sample_path(seed, 1, -10.0, 0.0, dt), b, 10.0));
  const auto s = sample_stats(squares(ys));
  // Left-point bias: dt e^{-2b dt} / (1 - e^{-2b dt}) against 1/(2b).
  EXPECT_NEAR(s.mean, 1.0 / (2.0 * b), 3.0 * s.se + b * dt / (2.0 * b));
}

TEST(StationaryOrbit, WindowTooShort) {
  const auto path = sample_path(4, 1, -5.0, 1.0, 1e-2);
  EXPECT_THROW(ou_stationary_orbit(path, 1.0, 20.0), RangeError);
  EXPECT_THROW(stationary_orbit_check(path, 1.0, 2.0, 5.0), RangeError);
}

TEST(StationaryOrbit, IdentityFirstOrder) {
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto coarse = sample_path(seed, 1, -20.0, 1.0, 2e-3);
    const auto fine = refine(coarse, 2);
    const double a = stationary_orbit_check(coarse, 1.0, 1.0, 20.0);
    EXPECT_EQ(stationary_orbit_check(coarse, 1.0, 0.0, 20.0), 0.0);
    EXPECT_LE(a, 10.0 * 2e-3);
    ratios.push_back(a / stationary_orbit_check(fine, 1.0, 1.0, 20.0));
  }
  EXPECT_GE(std::log2(median(ratios)), 0.9);
}

TEST(StationaryOrbit, ShiftRebasesAtOmegaT) {
  const auto base = sample_path(5, 1, -20.0, 1.0, 1e-2);
  auto vals = base.values();
  const double r0 = stationary_orbit_check(base, 1.0, 1.0, 20.0);
  for (double c : {0.0, 0.5}) {
    auto v = vals;
    for (std::size_t i = base.origin() + 1; i < base.nodes(); ++i) v[i] += c;
    const auto p = BrownianPath::from_values(base.dt(), base.origin(), 1, v);
    const double r = stationary_orbit_check(p, 1.0, 1.0, 20.0);
    if (c == 0.0)
      EXPECT_EQ(r, r0);
    else
      EXPECT_NE(r, r0);
  }
}
