#pragma once

// Gauss-Hermite rules (physicists' convention, weight function e^{-x^2})
// and Gaussian-expectation operators built on them.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "msfrail/errors.hpp"

namespace msfrail {

struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;    // strictly increasing, symmetric about 0
  std::vector<double> weights;  // positive, sum = sqrt(pi)
};

namespace detail {

// Orthonormal Hermite recurrence evaluated at x. Returns (p_n, p_{n-1}).
inline std::pair<double, double> hermite_orthonormal(int n, double x) {
  const double pi_quarter = 0.7511255444649425;  // pi^{-1/4}
  double p_prev = 0.0;
  double p = pi_quarter;
  for (int j = 1; j <= n; ++j) {
    double p_next = x * std::sqrt(2.0 / j) * p - std::sqrt((j - 1.0) / j) * p_prev;
    p_prev = p;
    p = p_next;
  }
  return {p, p_prev};
}

}  // namespace detail

// Nodes by Newton refinement of the Hermite recurrence roots, weights from
// the orthonormal derivative identity. Stable through order 100.
inline QuadratureRule gauss_hermite(int order) {
  if (order < 1 || order > 100) {
    throw std::invalid_argument("gauss_hermite: order must be in [1, 100], got " +
                                std::to_string(order));
  }
  const int n = order;
  QuadratureRule rule;
  rule.order = n;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);

  const int half = (n + 1) / 2;
  std::vector<double> pos(half, 0.0);  // positive roots, descending
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    // Initial guesses for roots in descending order (largest first).
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * pos[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * pos[1];
    } else {
      z = 2.0 * z - pos[i - 2];
    }
    double pp = 0.0;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
      auto [p, p_prev] = detail::hermite_orthonormal(n, z);
      pp = std::sqrt(2.0 * n) * p_prev;  // derivative of orthonormal H_n
      double dz = p / pp;
      z -= dz;
      if (std::abs(dz) <= 1e-15 * (1.0 + std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw NumericError("gauss_hermite: Newton iteration failed at order " +
                         std::to_string(n));
    }
    pos[i] = z;
    const double w = 2.0 / (pp * pp);
    // Mirror into ascending order; the odd-order centre node is exactly 0.
    rule.nodes[n - 1 - i] = z;
    rule.nodes[i] = -z;
    rule.weights[n - 1 - i] = w;
    rule.weights[i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

// E[f(U)] for U ~ N(0, sigma^2): sum_q (w_q / sqrt(pi)) f(sqrt(2) sigma z_q).
// sigma == 0 collapses to the point mass at 0.
template <typename F>
double expect_gaussian_1d(F&& f, double sigma, const QuadratureRule& rule) {
  if (sigma < 0.0) throw std::invalid_argument("expect_gaussian_1d: sigma must be >= 0");
  if (sigma == 0.0) return f(0.0);
  const double inv_sqrt_pi = 0.5641895835477563;
  const double scale = std::sqrt(2.0) * sigma;
  double acc = 0.0;
  for (int q = 0; q < rule.order; ++q) {
    acc += rule.weights[q] * inv_sqrt_pi * f(scale * rule.nodes[q]);
  }
  return acc;
}

// E[f(A, B)] for independent zero-mean Gaussians with sds sigma_a, sigma_b.
template <typename F>
double expect_gaussian_2d(F&& f, double sigma_a, double sigma_b,
                          const QuadratureRule& rule) {
  if (sigma_a < 0.0 || sigma_b < 0.0) {
    throw std::invalid_argument("expect_gaussian_2d: sigmas must be >= 0");
  }
  if (sigma_a == 0.0 && sigma_b == 0.0) return f(0.0, 0.0);
  if (sigma_a == 0.0) {
    return expect_gaussian_1d([&](double b) { return f(0.0, b); }, sigma_b, rule);
  }
  if (sigma_b == 0.0) {
    return expect_gaussian_1d([&](double a) { return f(a, 0.0); }, sigma_a, rule);
  }
  const double inv_pi = 0.3183098861837907;
  const double sa = std::sqrt(2.0) * sigma_a;
  const double sb = std::sqrt(2.0) * sigma_b;
  double acc = 0.0;
  for (int q = 0; q < rule.order; ++q) {
    const double a = sa * rule.nodes[q];
    double inner = 0.0;
    for (int r = 0; r < rule.order; ++r) {
      inner += rule.weights[r] * f(a, sb * rule.nodes[r]);
    }
    acc += rule.weights[q] * inner * inv_pi;
  }
  return acc;
}

}  // namespace msfrail
