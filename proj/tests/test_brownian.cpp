#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sample_stats.hpp"
#include "stokit/brownian.hpp"
#include "stokit/errors.hpp"
#include "stokit/random.hpp"

using namespace stokit;

TEST(SamplePath, OriginIsExactlyZero) {
  const auto p = sample_path(5, 1, 0.0, 1.0, 0.01);
  EXPECT_EQ(p.w(p.index_of(0.0)), 0.0);
  const auto q = sample_path(5, 3, -2.0, 1.0, 0.01);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(q.w(q.index_of(0.0), c), 0.0);
}

TEST(SamplePath, GridShape) {
  const auto p = sample_path(5, 2, -1.0, 2.0, 0.01);
  EXPECT_EQ(p.nodes(), 301u);
  EXPECT_NEAR(p.t_min(), -1.0, 1e-12);
  EXPECT_NEAR(p.t_max(), 2.0, 1e-12);
  for (std::size_t i = 0; i + 1 < p.nodes(); ++i) EXPECT_NEAR(p.time(i + 1) - p.time(i), 0.01, 1e-15);
}

TEST(SamplePath, RejectsBadArguments) {
  EXPECT_THROW(sample_path(1, 1, 0.0, 1.0, 0.0), ValidationError);
  EXPECT_THROW(sample_path(1, 1, 0.0, 1.0, -0.1), ValidationError);
  EXPECT_THROW(sample_path(1, 1, 0.5, 1.0, 0.1), ValidationError);
  EXPECT_THROW(sample_path(1, 1, -1.0, -0.5, 0.1), ValidationError);
  EXPECT_THROW(sample_path(1, 0, 0.0, 1.0, 0.1), ValidationError);
}

TEST(SamplePath, BitReproducible) {
  const auto a = sample_path(99, 2, -1.0, 1.0, 0.01);
  const auto b = sample_path(99, 2, -1.0, 1.0, 0.01);
  EXPECT_EQ(a.values(), b.values());
}

TEST(SamplePath, PositiveHalfIndependentOfWindow) {
  // The positive half is keyed by step index, so a wider negative window
  // leaves it unchanged.
  const auto a = sample_path(3, 1, 0.0, 1.0, 0.01);
  const auto b = sample_path(3, 1, -1.0, 1.0, 0.01);
  for (int k = 0; k <= 100; ++k) EXPECT_EQ(a.w(a.index_of(k * 0.01)), b.w(b.index_of(k * 0.01)));
}

TEST(SamplePath, VarianceMatchesAbsoluteTime) {
  std::vector<double> plus, minus;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto p = sample_path(derive_seed(1, s), 1, -1.0, 1.0, 0.05);
    plus.push_back(p.w(p.index_of(1.0)));
    minus.push_back(p.w(p.index_of(-1.0)));
  }
  const auto vp = sample_stats(squares(plus));
  const auto vm = sample_stats(squares(minus));
  EXPECT_NEAR(vp.mean, 1.0, 3.0 * vp.se);
  EXPECT_NEAR(vm.mean, 1.0, 3.0 * vm.se);
}

TEST(SamplePath, CovarianceAndIndependentIncrements) {
  std::vector<double> cov, cross, opposite;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto p = sample_path(derive_seed(2, s), 1, -1.0, 1.0, 0.05);
    const double w03 = p.w(p.index_of(0.3)), w08 = p.w(p.index_of(0.8)), wm5 = p.w(p.index_of(-0.5));
    cov.push_back(w03 * w08);
    cross.push_back(w03 * (w08 - w03));
    opposite.push_back(w03 * wm5);
  }
  const auto c = sample_stats(cov), x = sample_stats(cross), o = sample_stats(opposite);
  EXPECT_NEAR(c.mean, 0.3, 3.0 * c.se);
  EXPECT_NEAR(x.mean, 0.0, 3.0 * x.se);
  EXPECT_NEAR(o.mean, 0.0, 3.0 * o.se);
}

TEST(WienerShift, ZeroShiftIsIdentity) {
  const auto p = sample_path(4, 2, -1.0, 1.0, 0.01);
  const auto q = wiener_shift(p, 0.0);
  EXPECT_EQ(p.values(), q.values());
  EXPECT_EQ(p.origin(), q.origin());
}

TEST(WienerShift, ValueAtZeroVanishesAndMatchesDefinition) {
  const auto p = sample_path(4, 1, -1.0, 2.0, 0.01);
  const auto q = wiener_shift(p, 0.7);
  EXPECT_EQ(q.w(q.index_of(0.0)), 0.0);
  for (double t : {-1.5, -0.3, 0.0, 0.4, 1.3})
    EXPECT_NEAR(q.w(q.index_of(t)), p.w(p.index_of(t + 0.7)) - p.w(p.index_of(0.7)), 1e-14);
  EXPECT_NEAR(q.t_min(), -1.7, 1e-12);
  EXPECT_NEAR(q.t_max(), 1.3, 1e-12);
}

TEST(WienerShift, Semigroup) {
  const auto p = sample_path(8, 2, -2.0, 2.0, 0.01);
  const auto a = wiener_shift(wiener_shift(p, 0.3), 0.5);
  const auto b = wiener_shift(p, 0.8);
  ASSERT_EQ(a.nodes(), b.nodes());
  for (std::size_t i = 0; i < a.nodes(); ++i)
    for (int c = 0; c < 2; ++c) EXPECT_EQ(a.w(i, c), b.w(i, c));
}

TEST(WienerShift, RejectsOffGridAndOutside) {
  const auto p = sample_path(8, 1, -1.0, 1.0, 0.01);
  EXPECT_THROW(wiener_shift(p, 0.005), RangeError);
  EXPECT_THROW(wiener_shift(p, 1.5), RangeError);
  EXPECT_THROW(wiener_shift(p, -1.01), RangeError);
}

TEST(IndexOf, RejectsOffGrid) {
  const auto p = sample_path(8, 1, 0.0, 1.0, 0.01);
  EXPECT_THROW(p.index_of(0.0051), RangeError);
  EXPECT_THROW(p.index_of(1.01), RangeError);
  EXPECT_EQ(p.index_of(0.37), 37u);
}

TEST(Holder, ZeroPathIsDegenerate) {
  const auto p = BrownianPath::from_values(0.01, 0, 1, std::vector<double>(200, 0.0));
  EXPECT_THROW(holder_exponent_estimate(p), ValidationError);
}

TEST(Holder, TooFewNodes) {
  const auto p = sample_path(1, 1, 0.0, 0.5, 0.01);
  EXPECT_THROW(holder_exponent_estimate(p), ValidationError);
}

TEST(Holder, LinearRampHasSlopeOne) {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.003 * static_cast<double>(i);
  const auto p = BrownianPath::from_values(0.001, 0, 1, v);
  EXPECT_NEAR(holder_exponent_estimate(p), 1.0, 0.05);
}

TEST(Holder, MedianOverSeedsNearOneHalf) {
  std::vector<double> est;
  for (std::uint64_t s = 0; s < 100; ++s) est.push_back(holder_exponent_estimate(sample_path(s, 1, 0.0, 1.0, 1e-4)));
  std::nth_element(est.begin(), est.begin() + 50, est.end());
  EXPECT_GT(est[50], 0.35);
  EXPECT_LT(est[50], 0.55);
}

TEST(Refine, KeepsOriginalNodesExactly) {
  const auto p = sample_path(12, 2, -0.5, 1.0, 0.01);
  const auto r = refine(p, 2);
  EXPECT_EQ(r.refinement_level(), 1);
  EXPECT_DOUBLE_EQ(r.dt(), 0.005);
  EXPECT_EQ(r.nodes(), 2 * (p.nodes() - 1) + 1);
  for (std::size_t i = 0; i < p.nodes(); ++i)
    for (int c = 0; c < 2; ++c) EXPECT_EQ(r.w(2 * i, c), p.w(i, c));
}

TEST(Refine, IncrementsTelescope) {
  const auto p = sample_path(12, 1, 0.0, 1.0, 0.01);
  const auto r = refine(p, 4);
  for (std::size_t i = 0; i + 1 < p.nodes(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 4; ++j) sum += r.dw(4 * i + j);
    EXPECT_NEAR(sum, p.dw(i), 1e-14);
  }
}

TEST(Refine, CoarsenInvertsRefine) {
  const auto p = sample_path(13, 1, -0.2, 0.5, 0.01);
  const auto back = refine(p, 3).coarsen(3);
  ASSERT_EQ(back.nodes(), p.nodes());
  for (std::size_t i = 0; i < p.nodes(); ++i) EXPECT_EQ(back.w(i), p.w(i));
}

TEST(Refine, MidpointBridgeVariance) {
  const double dt = 0.01;
  std::vector<double> dev;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto p = sample_path(derive_seed(21, s), 1, 0.0, 0.02, dt);
    const auto r = refine(p, 2);
    dev.push_back(r.w(1) - 0.5 * (p.w(0) + p.w(1)));
  }
  const auto v = sample_stats(squares(dev));
  EXPECT_NEAR(v.mean, dt / 4.0, 3.0 * v.se);
}

TEST(Refine, RejectsSmallFactor) {
  const auto p = sample_path(1, 1, 0.0, 1.0, 0.01);
  EXPECT_THROW(refine(p, 1), ValidationError);
  EXPECT_THROW(refine(p, 0), ValidationError);
}

TEST(Refine, Deterministic) {
  const auto p = sample_path(1, 1, 0.0, 1.0, 0.01);
  EXPECT_EQ(refine(p, 2).values(), refine(p, 2).values());
}
