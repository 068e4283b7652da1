#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rdist/errors.hpp"
#include "rdist/loss.hpp"

using namespace rdist;

namespace {

// Brute-force oracle: explicit loops over the grid with the curve written out.
double dl_oracle(CoefficientPair y, CoefficientPair yh, const RadiusGrid& g) {
  double s = 0.0;
  for (double r : g.radii()) {
    const double a = r + y.k1 * r * r * r + y.k2 * r * r * r * r * r;
    const double b = r + yh.k1 * r * r * r + yh.k2 * r * r * r * r * r;
    s += (a - b) * (a - b);
  }
  return s;
}

}  // namespace

TEST(RadiusGrid, Default) {
  const auto g = default_grid();
  ASSERT_EQ(g.size(), 64u);
  EXPECT_DOUBLE_EQ(g.radii().front(), 0.0109375);
  EXPECT_EQ(g.radii().back(), 0.7);
  for (size_t i = 1; i < g.size(); ++i) EXPECT_GT(g.radii()[i], g.radii()[i - 1]);
}

TEST(RadiusGrid, Validation) {
  EXPECT_THROW(RadiusGrid({0.1, 0.2, 0.3}), DomainError);
  EXPECT_THROW(RadiusGrid({0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}), DomainError);
  EXPECT_THROW(RadiusGrid({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}), DomainError);
  EXPECT_THROW(RadiusGrid({0.1, 0.2, 0.3, 0.3, 0.5, 0.6, 0.65, 0.7}), DomainError);
  EXPECT_NO_THROW(RadiusGrid({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.65, 0.7}));
}

TEST(DistortionLoss, ZeroForEqualPairs) {
  EXPECT_EQ(distortion_loss({-0.3, 0.1}, {-0.3, 0.1}, default_grid()), 0.0);
}

TEST(DistortionLoss, Symmetric) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-0.7, 0.4);
  for (int i = 0; i < 100; ++i) {
    const CoefficientPair a{u(gen), u(gen)}, b{u(gen), u(gen)};
    EXPECT_EQ(distortion_loss(a, b, default_grid()), distortion_loss(b, a, default_grid()));
  }
}

TEST(DistortionLoss, K1OnlyClosedForm) {
  const auto g = default_grid();
  double s6 = 0.0;
  for (double r : g.radii()) s6 += r * r * r * r * r * r;
  const double k = 0.17;
  EXPECT_NEAR(distortion_loss({0, 0}, {k, 0}, g), k * k * s6, 1e-15);
  EXPECT_NEAR(distortion_loss({0, 0}, {k, 0}, g), dl_oracle({0, 0}, {k, 0}, g), 1e-15);
}

TEST(DistortionLoss, QuadraticHomogeneity) {
  const auto g = default_grid();
  for (double k : {-0.7, -0.1, 0.05, 0.3}) {
    const double one = distortion_loss({0, 0}, {k, 0}, g);
    EXPECT_NEAR(distortion_loss({0, 0}, {2 * k, 0}, g), 4 * one, 1e-12 * 4 * one);
  }
}

TEST(DistortionLoss, MatchesBruteForce) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-0.7, 0.4);
  const auto g = RadiusGrid::uniform(37);
  for (int i = 0; i < 50; ++i) {
    const CoefficientPair a{u(gen), u(gen)}, b{u(gen), u(gen)};
    EXPECT_NEAR(distortion_loss(a, b, g), dl_oracle(a, b, g), 1e-14);
  }
}

TEST(SplitLoss, Examples) {
  const auto g = default_grid();
  const auto z = split_loss({-0.2, 0.05}, {-0.2, 0.05}, g);
  EXPECT_EQ(z.l_k1, 0.0);
  EXPECT_EQ(z.l_k2, 0.0);
  EXPECT_EQ(z.total, 0.0);

  const auto only2 = split_loss({-0.2, 0.05}, {-0.2, 0.09}, g);
  EXPECT_EQ(only2.l_k1, 0.0);
  EXPECT_EQ(only2.total, only2.l_k2);

  const CoefficientPair y{-0.2, 0.05}, yh{-0.1, 0.08};
  const auto s = split_loss(y, yh, g);
  const double l1 = dl_oracle(y, {yh.k1, y.k2}, g);
  const double l2 = dl_oracle(y, {y.k1, yh.k2}, g);
  EXPECT_NEAR(s.l_k1, l1, 1e-15);
  EXPECT_NEAR(s.l_k2, l2, 1e-15);
  EXPECT_NEAR(s.total, l1 + l2, 1e-15);
  EXPECT_EQ(s.total, s.l_k1 + s.l_k2);
}

TEST(LossGradient, ZeroAtMinimum) {
  const auto g = loss_gradient({-0.4, 0.12}, {-0.4, 0.12}, default_grid());
  EXPECT_EQ(g.k1, 0.0);
  EXPECT_EQ(g.k2, 0.0);
}

TEST(LossGradient, MatchesCentralDifferences) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-0.7, 0.4);
  const auto grid = default_grid();
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const CoefficientPair y{u(gen), u(gen)}, yh{u(gen), u(gen)};
    const auto g = loss_gradient(y, yh, grid);
    const double f1 = (split_loss(y, {yh.k1 + h, yh.k2}, grid).total -
                       split_loss(y, {yh.k1 - h, yh.k2}, grid).total) / (2 * h);
    const double f2 = (split_loss(y, {yh.k1, yh.k2 + h}, grid).total -
                       split_loss(y, {yh.k1, yh.k2 - h}, grid).total) / (2 * h);
    EXPECT_LE(std::abs(g.k1 - f1), 1e-6 * std::max(std::abs(f1), 1e-8));
    EXPECT_LE(std::abs(g.k2 - f2), 1e-6 * std::max(std::abs(f2), 1e-8));
  }
}

TEST(LossGradient, Separable) {
  const auto grid = default_grid();
  const CoefficientPair y{-0.3, 0.07};
  const auto a = loss_gradient(y, {-0.1, 0.0}, grid);
  const auto b = loss_gradient(y, {-0.1, 0.3}, grid);
  EXPECT_EQ(a.k1, b.k1);
  const auto c = loss_gradient(y, {0.2, 0.0}, grid);
  EXPECT_EQ(a.k2, c.k2);
}
