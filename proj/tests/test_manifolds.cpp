#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "stokit/errors.hpp"
#include "stokit/integrators.hpp"
#include "stokit/manifolds.hpp"

using namespace stokit;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

SdeModel rotation_flow() {
  return SdeModel(
      "rotation", 2, 1, [](double, const Vector& x) -> Vector { return v2(-x[1], x[0]); },
      [](double, const Vector&) -> Matrix { return Matrix::Zero(2, 1); },
      [](double, const Vector&) -> std::vector<Matrix> { return {Matrix::Zero(2, 2)}; }, NoiseStructure::additive);
}

std::vector<Vector> line_grid(double lo, double hi, int n) {
  std::vector<Vector> g;
  for (int i = 0; i < n; ++i) g.push_back(Vector::Constant(1, lo + (hi - lo) * i / (n - 1)));
  return g;
}

}  // namespace

TEST(Tangency, CircleOnUnitCircle) {
  const auto model = models::circle_manifold();
  const auto spec = circle_spec();
  for (int k = 0; k < 16; ++k) {
    const double th = 2.0 * std::numbers::pi * k / 16.0;
    const auto r = tangency_residual(model, spec, v2(std::cos(th), std::sin(th)));
    EXPECT_NEAR(r.r_mu, 0.0, 1e-12);
    ASSERT_EQ(r.r_sigma.size(), 1);
    EXPECT_NEAR(r.r_sigma[0], 0.0, 1e-12);
  }
}

TEST(Tangency, EveryCenteredCircle) {
  const auto model = models::circle_manifold();
  const auto spec = circle_spec(2.0);
  for (int k = 0; k < 8; ++k) {
    const double th = 0.3 + k;
    const auto r = tangency_residual(model, spec, v2(2.0 * std::cos(th), 2.0 * std::sin(th)));
    EXPECT_NEAR(r.r_mu, 0.0, 1e-12);
    EXPECT_NEAR(r.r_sigma[0], 0.0, 1e-12);
  }
}

TEST(Tangency, NoNoiseReducesToFirstIntegral) {
  const auto model = rotation_flow();
  const auto ell = ellipse_spec();
  const Vector x = v2(0.3, -0.7);
  const auto r = tangency_residual(model, ell, x);
  EXPECT_EQ(r.r_sigma[0], 0.0);
  EXPECT_NEAR(r.r_mu, model.drift(0, x).dot(ell.grad(x)), 1e-15);
  EXPECT_NEAR(tangency_residual(model, circle_spec(), x).r_mu, 0.0, 1e-15);
}

TEST(Tangency, LinearInScaling) {
  const auto model = models::circle_manifold();
  const auto base = ellipse_spec();
  for (double lambda : {-2.0, 0.5, 3.0}) {
    const auto sc = scaled(base, lambda);
    for (const Vector& x : {v2(0.4, 0.9), v2(-1.2, 0.1), v2(0.7, -0.7)}) {
      const auto a = tangency_residual(model, base, x);
      const auto b = tangency_residual(model, sc, x);
      EXPECT_NEAR(b.r_mu, lambda * a.r_mu, 1e-12 * (1.0 + std::abs(a.r_mu)));
      EXPECT_NEAR(b.r_sigma[0], lambda * a.r_sigma[0], 1e-12 * (1.0 + std::abs(a.r_sigma[0])));
    }
  }
}

TEST(Tangency, NeedsJacobians) {
  const auto model = SdeModel(
      "nojac", 2, 1, [](double, const Vector& x) -> Vector { return -x; },
      [](double, const Vector& x) -> Matrix { return Matrix(x); });
  EXPECT_THROW(tangency_residual(model, circle_spec(), v2(1, 0)), CapabilityError);
  const auto fd = model.with_finite_difference_jacobians();
  EXPECT_NO_THROW(tangency_residual(fd, circle_spec(), v2(1, 0)));
  EXPECT_EQ(tangency_tolerance(fd), 1e-6);
  EXPECT_EQ(tangency_tolerance(models::circle_manifold()), 1e-10);
}

TEST(Tangency, ValidateSpec) {
  const std::vector<Vector> probes{v2(1, 0), v2(0.3, 0.2), v2(-0.5, 2.0)};
  EXPECT_NO_THROW(validate_manifold(circle_spec(), probes));
  ManifoldSpec bad = circle_spec();
  bad.grad = [](const Vector& x) -> Vector { return x; };
  EXPECT_THROW(validate_manifold(bad, probes), ValidationError);
}

TEST(Characteristics, ConstantTransport) {
  CharacteristicField f;
  f.a = [](const Vector&) -> Vector { return v2(1.0, 2.0); };
  f.c = [](const Vector&, double) { return 0.0; };
  f.gamma0 = [](const Vector& s) { return std::make_pair(v2(0.0, s[0]), std::sin(s[0])); };
  const auto surf = characteristics_solve(f, line_grid(-1, 1, 5), {0.0, 2.0}, 0.1);
  ASSERT_EQ(surf.curves.size(), 5u);
  for (const auto& c : surf.curves) {
    EXPECT_EQ(c.x(0, 0), 0.0);
    EXPECT_EQ(c.x(1, 0), c.s[0]);
    for (std::size_t k = 0; k < c.t.size(); ++k) {
      EXPECT_NEAR(c.x(0, k), c.t[k], 1e-12);
      EXPECT_NEAR(c.x(1, k), c.s[0] + 2.0 * c.t[k], 1e-12);
      EXPECT_EQ(c.u[k], std::sin(c.s[0]));
    }
  }
}

TEST(Characteristics, RotationKeepsRadius) {
  CharacteristicField f;
  f.a = [](const Vector& x) -> Vector { return v2(-x[1], x[0]); };
  f.c = [](const Vector&, double) { return 0.0; };
  f.gamma0 = [](const Vector& s) { return std::make_pair(v2(s[0], 0.0), s[0] * s[0]); };
  const double period = 2.0 * std::numbers::pi;
  const auto surf = characteristics_solve(f, line_grid(0.5, 1.5, 3), {0.0, period}, period / 1000.0);
  for (const auto& c : surf.curves) {
    const std::size_t last = c.t.size() - 1;
    EXPECT_NEAR(c.t[last], period, 1e-12);
    EXPECT_LE(std::abs(c.x.col(last).norm() - c.s[0]), 1e-8);
    EXPECT_NEAR(c.x(0, last), c.s[0], 1e-8);
    EXPECT_EQ(c.u[last], c.u[0]);
  }
}

TEST(Characteristics, LinearGrowthAndBackwards) {
  CharacteristicField f;
  f.a = [](const Vector&) -> Vector { return v2(1.0, 0.0); };
  f.c = [](const Vector&, double) { return 1.0; };
  f.gamma0 = [](const Vector& s) { return std::make_pair(v2(0.0, s[0]), 0.5); };
  const auto fwd = characteristics_solve(f, line_grid(0, 1, 2), {0.0, 3.0}, 0.25);
  for (std::size_t k = 0; k < fwd.curves[0].t.size(); ++k)
    EXPECT_NEAR(fwd.curves[0].u[k], 0.5 + fwd.curves[0].t[k], 1e-12);
  const auto back = characteristics_solve(f, line_grid(0, 1, 2), {0.0, -1.0}, 0.25);
  EXPECT_NEAR(back.curves[1].u.back(), -0.5, 1e-12);
  EXPECT_NEAR(back.curves[1].x(0, back.curves[1].t.size() - 1), -1.0, 1e-12);
}

TEST(Characteristics, BoundingBoxTruncates) {
  CharacteristicField f;
  f.a = [](const Vector&) -> Vector { return v2(1.0, 0.0); };
  f.c = [](const Vector&, double) { return 0.0; };
  f.gamma0 = [](const Vector& s) { return std::make_pair(v2(0.0, s[0]), 0.0); };
  const auto surf = characteristics_solve(f, line_grid(0, 1, 2), {0.0, 5.0}, 0.1, BoundingBox{v2(-1, -1), v2(2, 2)});
  for (const auto& c : surf.curves) {
    EXPECT_TRUE(c.truncated);
    EXPECT_LE(c.x(0, c.t.size() - 1), 2.0);
  }
}

TEST(Noncharacteristic, TransversalAndTangent) {
  CharacteristicField f;
  f.a = [](const Vector&) -> Vector { return v2(1.0, 0.0); };
  f.c = [](const Vector&, double) { return 0.0; };
  f.gamma0 = [](const Vector& s) { return std::make_pair(v2(0.0, s[0]), 0.0); };
  const auto grid = line_grid(-1, 1, 11);
  const auto ok = noncharacteristic_check(f, grid);
  EXPECT_TRUE(ok.pass);
  EXPECT_TRUE(ok.failing.empty());

  f.gamma0 = [](const Vector& s) { return std::make_pair(v2(s[0], 0.0), 0.0); };
  const auto bad = noncharacteristic_check(f, grid);
  EXPECT_FALSE(bad.pass);
  EXPECT_EQ(bad.failing.size(), grid.size());
}

TEST(Noncharacteristic, BorderlineAngle) {
  const double angle = 1e-9;
  CharacteristicField f;
  f.a = [angle](const Vector&) -> Vector { return v2(std::cos(angle), std::sin(angle)); };
  f.c = [](const Vector&, double) { return 0.0; };
  f.gamma0 = [](const Vector& s) { return std::make_pair(v2(s[0], 0.0), 0.0); };
  const auto rep = noncharacteristic_check(f, line_grid(0, 1, 5));
  EXPECT_FALSE(rep.pass);
  ASSERT_EQ(rep.least_singular_value.size(), 5u);
  for (double sv : rep.least_singular_value) {
    EXPECT_GT(sv, 0.0);
    EXPECT_LT(sv, 1e-8);
  }
}

TEST(Noncharacteristic, DegenerateTangents) {
  CharacteristicField f;
  f.a = [](const Vector&) -> Vector { return v2(1.0, 0.0); };
  f.c = [](const Vector&, double) { return 0.0; };
  f.gamma0 = [](const Vector&) { return std::make_pair(v2(0.0, 0.0), 0.0); };
  EXPECT_THROW(noncharacteristic_check(f, line_grid(0, 1, 5)), ValidationError);
}

TEST(ZeroSetExtraction, LinearAlongCurve) {
  CharacteristicField f;
  f.a = [](const Vector&) -> Vector { return v2(1.0, 0.0); };
  f.c = [](const Vector&, double) { return 1.0; };
  f.gamma0 = [](const Vector& s) { return std::make_pair(v2(0.0, s[0]), -1.0); };
  const auto z = extract_zero_set(characteristics_solve(f, {Vector::Constant(1, 0.25)}, {0.0, 2.0}, 0.3));
  ASSERT_EQ(z.points.size(), 1u);
  EXPECT_NEAR(z.points[0][0], 1.0, 1e-12);
  EXPECT_NEAR(z.points[0][1], 0.25, 1e-12);
  EXPECT_TRUE(z.notice.empty());
}

TEST(ZeroSetExtraction, NoSignChange) {
  CharacteristicField f;
  f.a = [](const Vector&) -> Vector { return v2(1.0, 0.0); };
  f.c = [](const Vector&, double) { return 0.0; };
  f.gamma0 = [](const Vector& s) { return std::make_pair(v2(0.0, s[0]), 2.0); };
  const auto z = extract_zero_set(characteristics_solve(f, line_grid(0, 1, 4), {0.0, 1.0}, 0.1));
  EXPECT_TRUE(z.points.empty());
  EXPECT_FALSE(z.notice.empty());
}

TEST(ZeroSetExtraction, CircleBenchmark) {
  // Invariant graphs of the circle model solve <sigma, grad u> = 0, so the
  // characteristics follow sigma = (-y, x) and carry u unchanged.
  const auto model = models::circle_manifold();
  CharacteristicField f;
  f.a = [&model](const Vector& x) -> Vector { return model.diffusion(0.0, x).col(0); };
  f.c = [](const Vector&, double) { return 0.0; };
  f.gamma0 = [](const Vector& s) { return std::make_pair(v2(s[0], 0.0), s[0] - 1.0); };
  const auto grid = line_grid(0.55, 1.45, 10);
  ASSERT_TRUE(noncharacteristic_check(f, grid).pass);
  const auto z = extract_zero_set(characteristics_solve(f, grid, {0.0, 2.0 * std::numbers::pi}, 0.01));
  ASSERT_GT(z.points.size(), 100u);
  const auto g = circle_spec();
  for (const auto& p : z.points) EXPECT_LE(std::abs(g.G(p)), 1e-6);
}

TEST(InvarianceMc, CircleShrinksEllipseDoesNot) {
  const auto model = models::circle_manifold();
  const Vector x0 = v2(1.0, 0.0);
  const auto inv = manifold_invariance_mc(model, circle_spec(), x0, 400, 0.01, 1.0, 5, 2);
  ASSERT_EQ(inv.levels.size(), 3u);
  ASSERT_EQ(inv.halving_factors.size(), 2u);
  for (double f : inv.halving_factors) {
    EXPECT_GE(f, 1.5);
    EXPECT_LE(f, 3.0);
  }
  const auto ctl = manifold_invariance_mc(model, ellipse_spec(), x0, 400, 0.01, 1.0, 5, 2);
  for (std::size_t i = 0; i < ctl.levels.size(); ++i) {
    EXPECT_GT(ctl.levels[i].median_max_abs_g, 0.1);
    EXPECT_GT(ctl.levels[i].median_max_abs_g, 20.0 * inv.levels[i].median_max_abs_g);
  }
  for (double f : ctl.halving_factors) EXPECT_LT(f, 1.2);
}

TEST(InvarianceMc, DeterministicFirstIntegral) {
  const double dt = 1e-3, T = 1.0;
  const auto rep = manifold_invariance_mc(rotation_flow(), circle_spec(), v2(1.0, 0.0), 4, dt, T, 1, 1,
                                          Scheme::euler_maruyama);
  // Euler on a rotation inflates r^2 by (1 + dt^2) per step.
  EXPECT_LE(rep.levels[0].median_max_abs_g, 1.01 * T * dt);
  EXPECT_NEAR(rep.halving_factors[0], 2.0, 0.05);
}

TEST(InvarianceMc, StartOffManifold) {
  EXPECT_THROW(manifold_invariance_mc(models::circle_manifold(), circle_spec(), v2(1.1, 0.0), 10, 0.01, 1.0, 1),
               ValidationError);
}

TEST(RestrictCircle, LiftStaysOnCircle) {
  const auto path = sample_path(3, 1, 0.0, 2.0, 1e-3);
  const auto red = restrict_circle(models::circle_manifold(), 0.4, path, 2.0);
  ASSERT_EQ(red.theta.size(), red.lifted.size());
  for (std::size_t k = 0; k < red.lifted.size(); ++k) {
    EXPECT_NEAR(red.lifted.state(k).squaredNorm(), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(red.theta[k], 0.4 + path.w(path.index_of(red.lifted.times[k])));
  }
}

TEST(RestrictCircle, ZeroPathIsFixedPoint) {
  const auto path = BrownianPath::from_values(0.1, 0, 1, std::vector<double>(11, 0.0));
  const auto red = restrict_circle(models::circle_manifold(), 0.0, path, 1.0);
  for (std::size_t k = 0; k < red.lifted.size(); ++k) {
    EXPECT_EQ(red.lifted.state(k)[0], 1.0);
    EXPECT_EQ(red.lifted.state(k)[1], 0.0);
  }
}

TEST(RestrictCircle, MatchesMilstein) {
  const auto model = models::circle_manifold();
  std::vector<double> dts, rms;
  for (int level = 0; level < 4; ++level) {
    double sum = 0.0;
    std::size_t count = 0;
    const double dt = 0.02 / std::pow(2.0, level);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto path = sample_path(seed, 1, 0.0, 1.0, dt);
      const auto red = restrict_circle(model, 0.0, path, 1.0);
      const auto sim = milstein(model, v2(1.0, 0.0), path, 0.0, 1.0);
      for (std::size_t k = 0; k < sim.size(); ++k) {
        sum += (sim.state(k) - red.lifted.state(k)).squaredNorm();
        ++count;
      }
    }
    dts.push_back(std::log(dt));
    rms.push_back(std::log(std::sqrt(sum / count)));
  }
  EXPECT_GE(fit_slope(dts, rms), 0.5);
}

TEST(RestrictCircle, WrongModel) {
  const auto path = sample_path(3, 1, 0.0, 1.0, 1e-2);
  EXPECT_THROW(restrict_circle(models::langevin(1.0, 1.0), 0.0, path, 1.0), CapabilityError);
}
