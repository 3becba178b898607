#include "msfrail/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace msfrail;

TEST(Bfgs, Quadratic) {
  auto f = [](const std::vector<double>& x) {
    return 2.0 * (x[0] - 1.0) * (x[0] - 1.0) + 0.5 * (x[1] + 3.0) * (x[1] + 3.0);
  };
  auto res = bfgs_minimize(f, {0.0, 0.0});
  EXPECT_TRUE(res.converged);
  EXPECT_NEAR(res.x[0], 1.0, 1e-6);
  EXPECT_NEAR(res.x[1], -3.0, 1e-6);
}

TEST(Bfgs, Rosenbrock) {
  auto f = [](const std::vector<double>& x) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  auto res = bfgs_minimize(f, {-1.2, 1.0});
  EXPECT_NEAR(res.x[0], 1.0, 1e-4);
  EXPECT_NEAR(res.x[1], 1.0, 1e-4);
}

TEST(Bfgs, DeterministicRepeats) {
  auto f = [](const std::vector<double>& x) {
    return std::cosh(x[0] - 0.3) + x[1] * x[1] * 0.25 + 0.1 * x[0] * x[1];
  };
  auto r1 = bfgs_minimize(f, {2.0, -2.0});
  auto r2 = bfgs_minimize(f, {2.0, -2.0});
  ASSERT_EQ(r1.x.size(), r2.x.size());
  for (std::size_t i = 0; i < r1.x.size(); ++i) {
    EXPECT_EQ(r1.x[i], r2.x[i]);  // bit-identical
  }
  EXPECT_EQ(r1.f, r2.f);
}

TEST(NelderMead, Quadratic) {
  auto f = [](const std::vector<double>& x) {
    return (x[0] - 2.0) * (x[0] - 2.0) + (x[1] - 0.5) * (x[1] - 0.5);
  };
  auto res = nelder_mead(f, {0.0, 0.0}, {});
  EXPECT_NEAR(res.x[0], 2.0, 1e-4);
  EXPECT_NEAR(res.x[1], 0.5, 1e-4);
}

TEST(FiniteDiff, GradientOfQuadratic) {
  auto f = [](const std::vector<double>& x) {
    return 3.0 * x[0] * x[0] + x[0] * x[1] + 2.0 * x[1] * x[1];
  };
  std::vector<double> g;
  long evals = 0;
  finite_diff_gradient(f, {1.0, -2.0}, 1e-6, g, &evals);
  EXPECT_NEAR(g[0], 6.0 * 1.0 + (-2.0), 1e-6);
  EXPECT_NEAR(g[1], 1.0 + 4.0 * (-2.0), 1e-6);
  EXPECT_EQ(evals, 4);
}

TEST(FiniteDiff, HessianOfQuadratic) {
  auto f = [](const std::vector<double>& x) {
    return 3.0 * x[0] * x[0] + x[0] * x[1] + 2.0 * x[1] * x[1];
  };
  auto H = finite_diff_hessian(f, {0.3, 0.7});
  EXPECT_NEAR(H(0, 0), 6.0, 1e-4);
  EXPECT_NEAR(H(0, 1), 1.0, 1e-4);
  EXPECT_NEAR(H(1, 0), 1.0, 1e-4);
  EXPECT_NEAR(H(1, 1), 4.0, 1e-4);
}

TEST(Matrix, SpdInverse) {
  Matrix m(2, 2);
  m(0, 0) = 4.0;
  m(0, 1) = 1.0;
  m(1, 0) = 1.0;
  m(1, 1) = 3.0;
  auto inv = spd_inverse(m);
  ASSERT_TRUE(inv.has_value());
  const double det = 11.0;
  EXPECT_NEAR((*inv)(0, 0), 3.0 / det, 1e-12);
  EXPECT_NEAR((*inv)(0, 1), -1.0 / det, 1e-12);
  EXPECT_NEAR((*inv)(1, 1), 4.0 / det, 1e-12);

  Matrix bad(2, 2);
  bad(0, 0) = 1.0;
  bad(0, 1) = 2.0;
  bad(1, 0) = 2.0;
  bad(1, 1) = 1.0;  // indefinite
  EXPECT_FALSE(spd_inverse(bad).has_value());
}

}  // namespace
