#pragma once

// Derivative-free-friendly minimization: BFGS on central-difference
// gradients with a Nelder-Mead fallback when the line search stalls, plus
// the finite-difference Hessian used for observed information.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "msfrail/matrix.hpp"

namespace msfrail {

using Objective = std::function<double(const std::vector<double>&)>;

struct OptimOptions {
  int max_iter = 500;
  double grad_tol = 1e-6;        // infinity norm of the numerical gradient
  double step_tol = 1e-8;        // infinity norm of the parameter step
  double fd_step = 1e-6;         // central-difference step, scaled by |x|
  int nm_max_iter = 4000;
  double nm_tol = 1e-10;
  int max_fallbacks = 2;
};

struct OptimResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::quiet_NaN();
  double grad_inf = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  long evaluations = 0;
  bool converged = false;
  bool used_fallback = false;
};

inline void finite_diff_gradient(const Objective& f, const std::vector<double>& x,
                                 double step, std::vector<double>& g, long* evals) {
  const std::size_t n = x.size();
  g.resize(n);
  std::vector<double> xp = x;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  if (evals) *evals += static_cast<long>(2 * n);
}

// Central second differences at x; returned matrix is symmetrized.
inline Matrix finite_diff_hessian(const Objective& f, const std::vector<double>& x,
                                  double step = 1e-4) {
  const std::size_t n = x.size();
  Matrix H(n, n);
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = step * std::max(1.0, std::abs(x[i]));
  const double f0 = f(x);
  std::vector<double> xp = x;
  for (std::size_t i = 0; i < n; ++i) {
    xp[i] = x[i] + h[i];
    const double fp = f(xp);
    xp[i] = x[i] - h[i];
    const double fm = f(xp);
    xp[i] = x[i];
    H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      xp[i] = x[i] + h[i];
      xp[j] = x[j] + h[j];
      const double fpp = f(xp);
      xp[j] = x[j] - h[j];
      const double fpm = f(xp);
      xp[i] = x[i] - h[i];
      const double fmm = f(xp);
      xp[j] = x[j] + h[j];
      const double fmp = f(xp);
      xp[i] = x[i];
      xp[j] = x[j];
      const double v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  return H;
}

inline OptimResult nelder_mead(const Objective& f, std::vector<double> x0,
                               const OptimOptions& opts, double spread = 0.25) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i + 1][i] += spread * std::max(1.0, std::abs(x0[i]));
  }
  OptimResult res;
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);
  res.evaluations = static_cast<long>(n + 1);

  std::vector<std::size_t> idx(n + 1);
  auto order = [&] {
    for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
  };
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  for (int it = 0; it < opts.nm_max_iter; ++it) {
    order();
    res.iterations = it;
    const std::size_t best = idx[0], worst = idx[n], second = idx[n - 1];
    if (std::abs(fv[worst] - fv[best]) <=
        opts.nm_tol * (1.0 + std::abs(fv[best]))) {
      break;
    }
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i <= n; ++i) {
        if (i != worst) s += pts[i][k];
      }
      centroid[k] = s / n;
    }
    for (std::size_t k = 0; k < n; ++k) xr[k] = centroid[k] + (centroid[k] - pts[worst][k]);
    const double fr = f(xr);
    ++res.evaluations;
    if (fr < fv[best]) {
      for (std::size_t k = 0; k < n; ++k) xe[k] = centroid[k] + 2.0 * (centroid[k] - pts[worst][k]);
      const double fe = f(xe);
      ++res.evaluations;
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      for (std::size_t k = 0; k < n; ++k) {
        xc[k] = outside ? centroid[k] + 0.5 * (xr[k] - centroid[k])
                        : centroid[k] - 0.5 * (centroid[k] - pts[worst][k]);
      }
      const double fc = f(xc);
      ++res.evaluations;
      if (fc < (outside ? fr : fv[worst])) {
        pts[worst] = xc;
        fv[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {  // shrink toward best
          if (i == idx[0]) continue;
          for (std::size_t k = 0; k < n; ++k) {
            pts[i][k] = pts[idx[0]][k] + 0.5 * (pts[i][k] - pts[idx[0]][k]);
          }
          fv[i] = f(pts[i]);
          ++res.evaluations;
        }
      }
    }
  }
  order();
  res.x = pts[idx[0]];
  res.f = fv[idx[0]];
  res.converged = true;
  return res;
}

inline OptimResult bfgs_minimize(const Objective& f, std::vector<double> x0,
                                 const OptimOptions& opts = {}) {
  const std::size_t n = x0.size();
  OptimResult res;
  res.x = std::move(x0);
  res.f = f(res.x);
  res.evaluations = 1;
  if (n == 0) {
    res.converged = true;
    res.grad_inf = 0.0;
    return res;
  }

  Matrix H = Matrix::identity(n);
  std::vector<double> g, g_new, d(n), x_new(n), s(n), y(n);
  finite_diff_gradient(f, res.x, opts.fd_step, g, &res.evaluations);
  int fallbacks = 0;

  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it;
    double ginf = 0.0;
    for (double v : g) ginf = std::max(ginf, std::abs(v));
    res.grad_inf = ginf;
    if (ginf <= opts.grad_tol) {
      res.converged = true;
      return res;
    }

    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += H(i, j) * g[j];
      d[i] = -acc;
    }
    double dg = 0.0;
    for (std::size_t i = 0; i < n; ++i) dg += d[i] * g[i];
    if (!(dg < 0.0)) {  // reset on loss of descent direction
      H = Matrix::identity(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      dg = 0.0;
      for (std::size_t i = 0; i < n; ++i) dg += d[i] * g[i];
      if (!(dg < 0.0)) {
        res.converged = res.grad_inf <= opts.grad_tol;
        return res;
      }
    }

    // Backtracking Armijo line search.
    const double c1 = 1e-4;
    double t = 1.0;
    double f_new = std::numeric_limits<double>::quiet_NaN();
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + t * d[i];
      f_new = f(x_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.f + c1 * t * dg) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }

    if (!accepted) {
      if (fallbacks >= opts.max_fallbacks) {
        res.converged = false;
        return res;
      }
      ++fallbacks;
      res.used_fallback = true;
      OptimOptions nm_opts = opts;
      OptimResult nm = nelder_mead(f, res.x, nm_opts, 0.05);
      res.evaluations += nm.evaluations;
      if (nm.f < res.f - 1e-14 * (1.0 + std::abs(res.f))) {
        res.x = nm.x;
        res.f = nm.f;
        finite_diff_gradient(f, res.x, opts.fd_step, g, &res.evaluations);
        H = Matrix::identity(n);
        continue;
      }
      double g2 = 0.0;
      for (double v : g) g2 = std::max(g2, std::abs(v));
      res.grad_inf = g2;
      res.converged = g2 <= opts.grad_tol;
      return res;
    }

    finite_diff_gradient(f, x_new, opts.fd_step, g_new, &res.evaluations);
    double step_inf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - res.x[i];
      y[i] = g_new[i] - g[i];
      step_inf = std::max(step_inf, std::abs(s[i]));
    }
    res.x = x_new;
    res.f = f_new;
    g = g_new;

    double ginf_new = 0.0;
    for (double v : g) ginf_new = std::max(ginf_new, std::abs(v));
    res.grad_inf = ginf_new;
    if (ginf_new <= opts.grad_tol && step_inf <= opts.step_tol) {
      res.converged = true;
      res.iterations = it + 1;
      return res;
    }
    if (step_inf <= opts.step_tol * 1e-3) {  // stalled
      res.converged = ginf_new <= opts.grad_tol;
      res.iterations = it + 1;
      return res;
    }

    double sy = 0.0, yy = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sy += s[i] * y[i];
      yy += y[i] * y[i];
      ss += s[i] * s[i];
    }
    if (sy > 1e-12 * std::sqrt(yy * ss)) {
      const double rho = 1.0 / sy;
      // H <- (I - rho s y') H (I - rho y s') + rho s s'
      std::vector<double> Hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += H(i, j) * y[j];
        Hy[i] = acc;
      }
      double yHy = 0.0;
      for (std::size_t i = 0; i < n; ++i) yHy += y[i] * Hy[i];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          H(i, j) += -rho * (Hy[i] * s[j] + s[i] * Hy[j]) +
                     rho * rho * yHy * s[i] * s[j] + rho * s[i] * s[j];
        }
      }
    }
  }
  res.iterations = opts.max_iter;
  res.converged = false;
  return res;
}

}  // namespace msfrail
