#pragma once

// Minimal dense matrix support for the small symmetric systems that show up
// in Hessians and BFGS updates.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace msfrail {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

// Lower-triangular Cholesky factor; nullopt when the matrix is not positive
// definite (within a small pivot tolerance).
inline std::optional<Matrix> cholesky(const Matrix& m) {
  const std::size_t n = m.rows;
  Matrix L(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    L(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

inline std::vector<double> cholesky_solve(const Matrix& L, std::vector<double> b) {
  const std::size_t n = L.rows;
  for (std::size_t i = 0; i < n; ++i) {  // forward: L y = b
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * b[k];
    b[i] = s / L(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {  // backward: L' x = y
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * b[k];
    b[ii] = s / L(ii, ii);
  }
  return b;
}

// Inverse of a symmetric positive definite matrix; nullopt when not SPD.
inline std::optional<Matrix> spd_inverse(const Matrix& m) {
  auto L = cholesky(m);
  if (!L) return std::nullopt;
  const std::size_t n = m.rows;
  Matrix inv(n, n);
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e.assign(n, 0.0);
    e[j] = 1.0;
    auto col = cholesky_solve(*L, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

}  // namespace msfrail
