#include "msfrail/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "msfrail/rng.hpp"

namespace {

using msfrail::CounterRng;
using msfrail::expect_gaussian_1d;
using msfrail::expect_gaussian_2d;
using msfrail::gauss_hermite;

constexpr double kSqrtPi = 1.7724538509055160273;

double double_factorial(int k) {
  double v = 1.0;
  for (int i = k; i > 1; i -= 2) v *= i;
  return v;
}

// Closed-form integral of x^k e^{-x^2}: 0 for odd k, (k-1)!! sqrt(pi) / 2^{k/2}.
double hermite_moment(int k) {
  if (k % 2 == 1) return 0.0;
  return double_factorial(k - 1) * kSqrtPi / std::pow(2.0, k / 2.0);
}

TEST(GaussHermite, OrderOneIsPointMassAtZero) {
  auto rule = gauss_hermite(1);
  ASSERT_EQ(rule.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(rule.nodes[0], 0.0);
  EXPECT_NEAR(rule.weights[0], kSqrtPi, 1e-14);
}

TEST(GaussHermite, OrderTwoMatchesHermiteRoots) {
  auto rule = gauss_hermite(2);
  const double r = 1.0 / std::sqrt(2.0);
  ASSERT_EQ(rule.nodes.size(), 2u);
  EXPECT_NEAR(rule.nodes[0], -r, 1e-14);
  EXPECT_NEAR(rule.nodes[1], r, 1e-14);
  EXPECT_NEAR(rule.weights[0], kSqrtPi / 2.0, 1e-14);
  EXPECT_NEAR(rule.weights[1], kSqrtPi / 2.0, 1e-14);
}

TEST(GaussHermite, QuarticMomentAtOrderTwenty) {
  auto rule = gauss_hermite(20);
  double acc = 0.0;
  for (int q = 0; q < rule.order; ++q) {
    acc += rule.weights[q] * std::pow(rule.nodes[q], 4);
  }
  EXPECT_NEAR(acc, 0.75 * kSqrtPi, 1e-10);
}

TEST(GaussHermite, RuleInvariants) {
  for (int order : {1, 2, 3, 5, 8, 13, 20, 40, 64, 100}) {
    auto rule = gauss_hermite(order);
    ASSERT_EQ(rule.nodes.size(), static_cast<size_t>(order));
    double wsum = 0.0;
    for (int q = 0; q < order; ++q) {
      EXPECT_GT(rule.weights[q], 0.0) << "order " << order;
      wsum += rule.weights[q];
      if (q > 0) EXPECT_LT(rule.nodes[q - 1], rule.nodes[q]);
      EXPECT_NEAR(rule.nodes[q], -rule.nodes[order - 1 - q], 1e-12);
    }
    EXPECT_NEAR(wsum, kSqrtPi, 1e-10) << "order " << order;
  }
}

TEST(GaussHermite, ExactForPolynomialsUpToDegree) {
  // Rules of order Q integrate x^k e^{-x^2} exactly for k <= 2Q-1.
  for (int order = 1; order <= 40; ++order) {
    auto rule = gauss_hermite(order);
    for (int k = 0; k <= 2 * order - 1; ++k) {
      double acc = 0.0;
      double abs_sum = 0.0;  // the relative scale of the cancelled sum
      for (int q = 0; q < order; ++q) {
        const double term = rule.weights[q] * std::pow(rule.nodes[q], k);
        acc += term;
        abs_sum += std::abs(term);
      }
      const double expected = hermite_moment(k);
      const double scale = std::max({1.0, std::abs(expected), abs_sum});
      EXPECT_NEAR(acc, expected, 1e-9 * scale) << "order " << order << " k " << k;
    }
  }
}

TEST(GaussHermite, OrderOutOfRangeThrows) {
  EXPECT_THROW(gauss_hermite(0), std::invalid_argument);
  EXPECT_THROW(gauss_hermite(-3), std::invalid_argument);
  EXPECT_THROW(gauss_hermite(101), std::invalid_argument);
}

TEST(ExpectGaussian1d, NormalizesConstants) {
  auto rule = gauss_hermite(20);
  for (double sigma : {0.0, 0.3, 1.0, 2.5}) {
    EXPECT_NEAR(expect_gaussian_1d([](double) { return 1.0; }, sigma, rule), 1.0, 1e-12);
  }
}

TEST(ExpectGaussian1d, SecondMoment) {
  auto rule = gauss_hermite(2);
  EXPECT_NEAR(expect_gaussian_1d([](double u) { return u * u; }, 1.0, rule), 1.0, 1e-12);
}

TEST(ExpectGaussian1d, ZeroSigmaIsPointMass) {
  auto rule = gauss_hermite(20);
  auto f = [](double u) { return 1.0 / (1.0 + std::exp(-(0.5 + u))); };
  EXPECT_DOUBLE_EQ(expect_gaussian_1d(f, 0.0, rule), f(0.0));
}

TEST(ExpectGaussian1d, NegativeSigmaThrows) {
  auto rule = gauss_hermite(4);
  EXPECT_THROW(expect_gaussian_1d([](double) { return 1.0; }, -0.1, rule),
               std::invalid_argument);
}

TEST(ExpectGaussian2d, BasicIdentities) {
  auto rule = gauss_hermite(20);
  EXPECT_NEAR(expect_gaussian_2d([](double, double) { return 1.0; }, 0.7, 1.3, rule),
              1.0, 1e-12);
  EXPECT_NEAR(expect_gaussian_2d([](double a, double b) { return a * b; }, 0.7, 1.3, rule),
              0.0, 1e-12);
  EXPECT_NEAR(
      expect_gaussian_2d([](double a, double b) { return a * a + b * b; }, 0.5, 2.0, rule),
      4.25, 1e-10);
}

TEST(ExpectGaussian1d, AgreesWithMonteCarlo) {
  auto rule = gauss_hermite(20);
  CounterRng rng(20240811);
  const int n_draws = 1000000;
  for (double sigma : {0.25, 0.8, 1.2, 2.5}) {
    for (double eta : {-5.0, -1.0, 0.0, 2.0, 5.0}) {
      auto f = [&](double u) { return 1.0 / (1.0 + std::exp(-(eta + u))); };
      double sum = 0.0, sum2 = 0.0;
      for (int i = 0; i < n_draws; ++i) {
        const double v = f(sigma * rng.normal());
        sum += v;
        sum2 += v * v;
      }
      const double mean = sum / n_draws;
      const double var = (sum2 - n_draws * mean * mean) / (n_draws - 1.0);
      const double se = std::sqrt(var / n_draws);
      const double ghq = expect_gaussian_1d(f, sigma, rule);
      EXPECT_NEAR(ghq, mean, 4.0 * se + 1e-12)
          << "sigma=" << sigma << " eta=" << eta;
    }
  }
}

}  // namespace
