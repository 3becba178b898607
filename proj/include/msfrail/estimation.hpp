#pragma once

// Maximum-likelihood fitting via GHQ-marginalized optimization, Wald
// inference from a numerical Hessian, and MAP estimates of account-level
// frailties.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msfrail/likelihood.hpp"
#include "msfrail/matrix.hpp"
#include "msfrail/model.hpp"
#include "msfrail/optim.hpp"

namespace msfrail {

struct FitConfig {
  OptimOptions optim;
  double sigma_init = 0.5;
  bool compute_hessian = true;
  double hessian_step = 1e-4;
};

struct FittedModel {
  ModelSpec spec;
  ParameterVector params;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  Matrix hessian;  // of -loglik at the optimum (empty when skipped)
  std::vector<double> se;  // NaN where unavailable
  bool se_valid = false;
  bool converged = false;
  int iterations = 0;
  double grad_inf = std::numeric_limits<double>::quiet_NaN();
  bool separation_warning = false;
  std::vector<std::string> param_names;
};

namespace detail {

inline bool detect_separation(const TransitionPanel& panel) {
  const std::size_t n = panel.n_rows();
  if (n == 0) return false;
  bool any0 = false, any1 = false;
  for (std::size_t r = 0; r < n; ++r) (panel.outcomes[r] ? any1 : any0) = true;
  if (!any0 || !any1) return true;
  // A covariate whose ranges under y=0 and y=1 do not overlap separates.
  const std::size_t p = panel.n_covariates();
  for (std::size_t k = 0; k < p; ++k) {
    double min0 = std::numeric_limits<double>::infinity(), max0 = -min0;
    double min1 = min0, max1 = -min0;
    for (std::size_t r = 0; r < n; ++r) {
      const double v = panel.x_row(r)[k];
      if (panel.outcomes[r]) {
        min1 = std::min(min1, v);
        max1 = std::max(max1, v);
      } else {
        min0 = std::min(min0, v);
        max0 = std::max(max0, v);
      }
    }
    if (max0 == min0 && min0 == min1 && min1 == max1) continue;  // constant column
    if (max0 < min1 || max1 < min0) return true;
  }
  return false;
}

}  // namespace detail

inline FittedModel fit_mle(const ModelSpec& spec, const TransitionPanel& panel,
                           const std::optional<ParameterVector>& init = std::nullopt,
                           const FitConfig& config = {}) {
  if (panel.n_rows() == 0) throw DataError("fit_mle: empty panel " + to_string(panel.pair));
  TransitionLoglik eval(spec, panel);

  ParameterVector start = init ? *init : eval.make_params(config.sigma_init);
  if (start.size() != eval.n_params()) {
    throw ConfigError("fit_mle: init parameter vector does not match the design");
  }
  if (init && start.alpha_times != eval.alpha_times()) {
    throw ConfigError("fit_mle: init baseline times do not match the panel");
  }

  auto objective = [&eval](const std::vector<double>& v) { return -eval.loglik_packed(v); };
  OptimResult opt = bfgs_minimize(objective, start.packed(), config.optim);

  FittedModel fit;
  fit.spec = spec;
  fit.params = eval.make_params(config.sigma_init);
  fit.params.set_packed(opt.x);
  fit.loglik = -opt.f;
  fit.converged = opt.converged;
  fit.iterations = opt.iterations;
  fit.grad_inf = opt.grad_inf;
  fit.separation_warning = detail::detect_separation(panel);
  fit.param_names = eval.param_names();

  if (config.compute_hessian) {
    fit.hessian = finite_diff_hessian(objective, opt.x, config.hessian_step);
    const std::size_t np = fit.hessian.rows;
    fit.se.assign(np, std::numeric_limits<double>::quiet_NaN());
    auto inv = spd_inverse(fit.hessian);
    if (inv) {
      fit.se_valid = true;
      for (std::size_t i = 0; i < np; ++i) {
        const double v = (*inv)(i, i);
        if (v > 0.0) fit.se[i] = std::sqrt(v);
      }
    }
  }
  return fit;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct WaldRow {
  std::string name;
  double estimate = 0.0;
  std::optional<double> se;
  std::optional<double> p;
};

// Wald z-tests for baseline and fixed-effect coefficients. Variance
// components sit on the boundary of the parameter space and are excluded;
// the bootstrap LRT covers them.
inline std::vector<WaldRow> wald_tests(const FittedModel& fit) {
  if (!fit.converged) {
    throw std::invalid_argument("wald_tests: fit did not converge");
  }
  const std::size_t n_fixed = fit.params.alpha.size() + fit.params.beta.size();
  std::vector<WaldRow> rows;
  const bool have_se = fit.se_valid && fit.se.size() >= n_fixed;

  std::optional<Matrix> block_inv;
  if (!have_se && fit.hessian.rows >= n_fixed && n_fixed > 0) {
    // Fall back to the alpha/beta block when the full Hessian is not PD.
    Matrix block(n_fixed, n_fixed);
    for (std::size_t i = 0; i < n_fixed; ++i) {
      for (std::size_t j = 0; j < n_fixed; ++j) block(i, j) = fit.hessian(i, j);
    }
    block_inv = spd_inverse(block);
  }

  for (std::size_t i = 0; i < n_fixed; ++i) {
    WaldRow row;
    row.name = i < fit.param_names.size() ? fit.param_names[i] : "param" + std::to_string(i);
    row.estimate = i < fit.params.alpha.size()
                       ? fit.params.alpha[i]
                       : fit.params.beta[i - fit.params.alpha.size()];
    double se = std::numeric_limits<double>::quiet_NaN();
    if (have_se) {
      se = fit.se[i];
    } else if (block_inv && (*block_inv)(i, i) > 0.0) {
      se = std::sqrt((*block_inv)(i, i));
    }
    if (std::isfinite(se) && se > 0.0) {
      row.se = se;
      const double z = std::abs(row.estimate / se);
      row.p = std::max(std::erfc(z / std::sqrt(2.0)), 1e-300);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

struct MapFrailtyEstimate {
  AccountId account_id;
  std::vector<double> mode;  // 1 value (intercept), 2 (linear), or per segment
  double curvature = 0.0;    // -d2/du2 at the mode; determinant in 2-d
};

namespace detail {

// Newton ascent of sum_t logBern(y_t; eta_t + u) - u^2/(2 sigma^2); the
// objective is strictly concave in u.
inline std::pair<double, double> map_mode_1d(std::span<const double> eta,
                                             std::span<const std::uint8_t> y,
                                             double sigma) {
  if (sigma < 1e-8) return {0.0, std::numeric_limits<double>::infinity()};
  const double inv_var = 1.0 / (sigma * sigma);
  double u = 0.0;
  for (int it = 0; it < 100; ++it) {
    double g = -u * inv_var;
    double h = -inv_var;
    for (std::size_t r = 0; r < eta.size(); ++r) {
      const double p = logistic(eta[r] + u);
      g += (y[r] ? 1.0 : 0.0) - p;
      h -= p * (1.0 - p);
    }
    const double step = g / h;
    u -= step;
    if (!std::isfinite(u)) throw NumericError("MAP frailty: non-finite objective");
    if (std::abs(step) < 1e-12) break;
  }
  double h = -inv_var;
  for (std::size_t r = 0; r < eta.size(); ++r) {
    const double p = logistic(eta[r] + u);
    h -= p * (1.0 - p);
  }
  return {u, -h};
}

}  // namespace detail

inline MapFrailtyEstimate estimate_map_frailty(const FittedModel& fit,
                                               const TransitionPanel& panel,
                                               const AccountId& account) {
  if (fit.spec.frailty.kind == FrailtyKind::none) {
    throw ConfigError("estimate_map_frailty: fit has no frailty");
  }
  auto it = std::lower_bound(panel.account_ids.begin(), panel.account_ids.end(), account);
  if (it == panel.account_ids.end() || *it != account) {
    throw std::invalid_argument("estimate_map_frailty: account '" + account +
                                "' has no rows in the panel");
  }
  const std::size_t a = static_cast<std::size_t>(it - panel.account_ids.begin());
  const std::size_t lo = panel.offsets[a];
  const std::size_t hi = panel.offsets[a + 1];

  TransitionLoglik eval(fit.spec, panel);
  std::vector<double> eta_all;
  eval.compute_eta(fit.params.alpha.data(), fit.params.beta.data(), eta_all);

  MapFrailtyEstimate out;
  out.account_id = account;

  switch (fit.spec.frailty.kind) {
    case FrailtyKind::intercept: {
      std::span<const double> eta(eta_all.data() + lo, hi - lo);
      std::span<const std::uint8_t> y(panel.outcomes.data() + lo, hi - lo);
      auto [mode, curv] = detail::map_mode_1d(eta, y, fit.params.sigma(0));
      out.mode = {mode};
      out.curvature = curv;
      break;
    }
    case FrailtyKind::piecewise: {
      const auto& segs = fit.spec.frailty.segments;
      const auto& slots = eval.sigma_slots();
      out.mode.assign(segs.size(), 0.0);
      double curv = 1.0;
      for (std::size_t k = 0; k < segs.size(); ++k) {
        std::vector<double> eta;
        std::vector<std::uint8_t> y;
        for (std::size_t r = lo; r < hi; ++r) {
          if (eval.row_segments()[r] == static_cast<int>(k)) {
            eta.push_back(eta_all[r]);
            y.push_back(panel.outcomes[r]);
          }
        }
        if (eta.empty() || slots[k] < 0) continue;  // no data or pinned to zero
        auto [mode, c] = detail::map_mode_1d(eta, y, fit.params.sigma(slots[k]));
        out.mode[k] = mode;
        curv *= c;
      }
      out.curvature = curv;
      break;
    }
    case FrailtyKind::linear: {
      const double sa = fit.params.sigma(0);
      const double sb = fit.params.sigma(1);
      double a_val = 0.0, b_val = 0.0;
      const double inv_va = sa < 1e-8 ? 0.0 : 1.0 / (sa * sa);
      const double inv_vb = sb < 1e-8 ? 0.0 : 1.0 / (sb * sb);
      double haa = 0, hab = 0, hbb = 0;
      for (int itn = 0; itn < 100; ++itn) {
        double ga = -a_val * inv_va, gb = -b_val * inv_vb;
        haa = -inv_va;
        hbb = -inv_vb;
        hab = 0.0;
        for (std::size_t r = lo; r < hi; ++r) {
          const double t = panel.times[r];
          const double p = logistic(eta_all[r] + a_val * t + b_val);
          const double res = (panel.outcomes[r] ? 1.0 : 0.0) - p;
          const double w = p * (1.0 - p);
          ga += res * t;
          gb += res;
          haa -= w * t * t;
          hab -= w * t;
          hbb -= w;
        }
        if (sa < 1e-8) {  // slope pinned at zero
          ga = 0.0;
          haa = -1.0;
          hab = 0.0;
        }
        if (sb < 1e-8) {
          gb = 0.0;
          hbb = -1.0;
          hab = 0.0;
        }
        const double det = haa * hbb - hab * hab;
        if (!(std::abs(det) > 0.0)) throw NumericError("MAP frailty: singular Hessian");
        const double da = (gb * hab - ga * hbb) / det;
        const double db = (ga * hab - gb * haa) / det;
        a_val += da;
        b_val += db;
        if (!std::isfinite(a_val) || !std::isfinite(b_val)) {
          throw NumericError("MAP frailty: non-finite objective");
        }
        if (std::abs(da) < 1e-12 && std::abs(db) < 1e-12) break;
      }
      if (sa < 1e-8) a_val = 0.0;
      if (sb < 1e-8) b_val = 0.0;
      out.mode = {a_val, b_val};
      out.curvature = haa * hbb - hab * hab;  // det of -Hessian == det(Hessian) in 2-d
      break;
    }
    default:
      break;
  }
  return out;
}

}  // namespace msfrail
