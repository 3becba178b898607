#pragma once

// Conditional and GHQ-marginalized log-likelihoods for the four model
// variants (no frailty, random intercept, random linear, random piecewise)
// over one transition panel.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "msfrail/data.hpp"
#include "msfrail/errors.hpp"
#include "msfrail/model.hpp"
#include "msfrail/quadrature.hpp"

namespace msfrail {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

// Probabilities are floored at 1e-12 inside logs so extreme linear
// predictors during line searches cannot produce -inf.
inline constexpr double kLogProbFloor = -27.631021115928547;  // log(1e-12)

inline double log_bernoulli(bool y, double eta) {
  const double lp = y ? log_sigmoid(eta) : log_sigmoid(-eta);
  return lp < kLogProbFloor ? kLogProbFloor : lp;
}

// eta = alpha_t + x'beta. The alpha term applies only when the parameter
// vector carries baseline coefficients; an unseen t is an error, never a
// carry-forward.
inline double linear_predictor(const ParameterVector& params,
                               std::span<const double> x, int t) {
  if (params.beta.size() != x.size()) {
    throw ConfigError("linear_predictor: covariate/beta dimension mismatch (" +
                      std::to_string(x.size()) + " vs " +
                      std::to_string(params.beta.size()) + ")");
  }
  double eta = 0.0;
  if (!params.alpha_times.empty()) {
    auto it = std::lower_bound(params.alpha_times.begin(), params.alpha_times.end(), t);
    if (it == params.alpha_times.end() || *it != t) {
      throw DataError("linear_predictor: no baseline coefficient for time " +
                      std::to_string(t));
    }
    eta += params.alpha[static_cast<std::size_t>(it - params.alpha_times.begin())];
  }
  for (std::size_t k = 0; k < x.size(); ++k) eta += x[k] * params.beta[k];
  return eta;
}

inline double linear_predictor(const ParameterVector& params,
                               std::span<const double> x, int t, double frailty) {
  return linear_predictor(params, x, t) + frailty;
}

inline double linear_predictor(const ParameterVector& params,
                               std::span<const double> x, int t, double slope,
                               double intercept) {
  return linear_predictor(params, x, t) + slope * t + intercept;
}

// Evaluates the model log-likelihood over a panel. Construction resolves the
// covariate columns, baseline time slots and piecewise segments once; the
// hot path then works on flat arrays. Not thread-safe: concurrent fits use
// separate evaluators.
class TransitionLoglik {
 public:
  TransitionLoglik(const ModelSpec& spec, const TransitionPanel& panel)
      : spec_(spec), panel_(&panel) {
    validate(spec_);
    const std::size_t p = spec_.covariate_names.size();
    std::vector<std::size_t> cols(p);
    for (std::size_t k = 0; k < p; ++k) {
      auto it = std::find(panel.covariate_names.begin(), panel.covariate_names.end(),
                          spec_.covariate_names[k]);
      if (it == panel.covariate_names.end()) {
        throw ConfigError("covariate '" + spec_.covariate_names[k] +
                          "' not present in panel " + to_string(panel.pair));
      }
      cols[k] = static_cast<std::size_t>(it - panel.covariate_names.begin());
    }
    const std::size_t n = panel.n_rows();
    xsub_.resize(n * p);
    for (std::size_t r = 0; r < n; ++r) {
      auto row = panel.x_row(r);
      for (std::size_t k = 0; k < p; ++k) xsub_[r * p + k] = row[cols[k]];
    }

    if (spec_.baseline == BaselineKind::piecewise_time) {
      alpha_times_.assign(panel.times.begin(), panel.times.end());
      std::sort(alpha_times_.begin(), alpha_times_.end());
      alpha_times_.erase(std::unique(alpha_times_.begin(), alpha_times_.end()),
                         alpha_times_.end());
      alpha_slot_.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        alpha_slot_[r] = static_cast<int>(
            std::lower_bound(alpha_times_.begin(), alpha_times_.end(), panel.times[r]) -
            alpha_times_.begin());
      }
    }

    if (spec_.frailty.kind == FrailtyKind::piecewise) {
      segment_.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        auto seg = spec_.frailty.segment_index(panel.times[r]);
        if (!seg) {
          throw ConfigError("time " + std::to_string(panel.times[r]) +
                            " lies outside every piecewise frailty segment");
        }
        segment_[r] = *seg;
      }
      sigma_slot_.assign(spec_.frailty.segments.size(), -1);
      int slot = 0;
      for (std::size_t k = 0; k < spec_.frailty.segments.size(); ++k) {
        if (!spec_.frailty.segment_pinned(k)) sigma_slot_[k] = slot++;
      }
    }

    if (spec_.frailty.kind != FrailtyKind::none) {
      rule_ = gauss_hermite(spec_.quadrature_order);
      log_wtilde_.resize(rule_.order);
      const double log_sqrt_pi = 0.5723649429247001;  // log(sqrt(pi))
      for (int q = 0; q < rule_.order; ++q) {
        log_wtilde_[q] = std::log(rule_.weights[q]) - log_sqrt_pi;
      }
    }
    eta_.resize(n);
  }

  const ModelSpec& spec() const { return spec_; }
  const TransitionPanel& panel() const { return *panel_; }
  const QuadratureRule& rule() const { return rule_; }
  const std::vector<int>& alpha_times() const { return alpha_times_; }

  std::size_t n_alpha() const { return alpha_times_.size(); }
  std::size_t n_beta() const { return spec_.covariate_names.size(); }
  std::size_t n_sigma() const { return static_cast<std::size_t>(spec_.frailty.n_sigma()); }
  std::size_t n_params() const { return n_alpha() + n_beta() + n_sigma(); }

  std::vector<std::string> param_names() const {
    std::vector<std::string> out;
    for (int t : alpha_times_) out.push_back("alpha[" + std::to_string(t) + "]");
    for (const auto& n : spec_.covariate_names) out.push_back("beta:" + n);
    switch (spec_.frailty.kind) {
      case FrailtyKind::none: break;
      case FrailtyKind::intercept: out.push_back("log_sigma_u"); break;
      case FrailtyKind::linear:
        out.push_back("log_sigma_a");
        out.push_back("log_sigma_b");
        break;
      case FrailtyKind::piecewise:
        for (std::size_t k = 0; k < spec_.frailty.segments.size(); ++k) {
          if (!spec_.frailty.segment_pinned(k)) {
            out.push_back("log_sigma_" + std::to_string(k + 1));
          }
        }
        break;
    }
    return out;
  }

  ParameterVector make_params(double sigma_init = 0.5) const {
    ParameterVector p;
    p.alpha_times = alpha_times_;
    p.alpha.assign(n_alpha(), 0.0);
    p.beta.assign(n_beta(), 0.0);
    p.log_sigma.assign(n_sigma(), std::log(sigma_init));
    return p;
  }

  double loglik(const ParameterVector& params) const {
    return loglik_packed(params.packed());
  }

  double loglik_packed(const std::vector<double>& v) const {
    if (v.size() != n_params()) {
      throw ConfigError("loglik: parameter vector size mismatch");
    }
    const double* alpha = v.data();
    const double* beta = v.data() + n_alpha();
    const double* logsig = beta + n_beta();
    fill_eta(alpha, beta);
    switch (spec_.frailty.kind) {
      case FrailtyKind::none: return loglik_none();
      case FrailtyKind::intercept: return loglik_intercept(std::exp(logsig[0]));
      case FrailtyKind::linear:
        return loglik_linear(std::exp(logsig[0]), std::exp(logsig[1]));
      case FrailtyKind::piecewise: return loglik_piecewise(logsig);
    }
    return 0.0;
  }

  // Internals shared with the EM machinery.
  const std::vector<double>& design() const { return xsub_; }
  const std::vector<int>& alpha_slots() const { return alpha_slot_; }
  const std::vector<int>& row_segments() const { return segment_; }
  const std::vector<int>& sigma_slots() const { return sigma_slot_; }
  const std::vector<double>& log_wtilde() const { return log_wtilde_; }

  void compute_eta(const double* alpha, const double* beta,
                   std::vector<double>& out) const {
    const std::size_t n = panel_->n_rows();
    const std::size_t p = n_beta();
    out.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      double e = alpha_slot_.empty() ? 0.0 : alpha[alpha_slot_[r]];
      const double* xr = xsub_.data() + r * p;
      for (std::size_t k = 0; k < p; ++k) e += xr[k] * beta[k];
      out[r] = e;
    }
  }

  static double log_sum_exp(const double* s, int n) {
    double m = s[0];
    for (int i = 1; i < n; ++i) m = std::max(m, s[i]);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::exp(s[i] - m);
    return m + std::log(acc);
  }

 private:
  void fill_eta(const double* alpha, const double* beta) const {
    const std::size_t n = panel_->n_rows();
    const std::size_t p = n_beta();
    for (std::size_t r = 0; r < n; ++r) {
      double e = alpha_slot_.empty() ? 0.0 : alpha[alpha_slot_[r]];
      const double* xr = xsub_.data() + r * p;
      for (std::size_t k = 0; k < p; ++k) e += xr[k] * beta[k];
      eta_[r] = e;
    }
  }

  double loglik_none() const {
    const std::size_t n = panel_->n_rows();
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += log_bernoulli(panel_->outcomes[r] != 0, eta_[r]);
    }
    check_finite(total, "fixed-effects");
    return total;
  }

  double loglik_intercept(double sigma) const {
    const double scale = std::sqrt(2.0) * sigma;
    const int Q = rule_.order;
    std::vector<double> s(Q);
    double total = 0.0;
    for (std::size_t a = 0; a < panel_->n_accounts(); ++a) {
      for (int q = 0; q < Q; ++q) s[q] = log_wtilde_[q];
      for (std::size_t r = panel_->offsets[a]; r < panel_->offsets[a + 1]; ++r) {
        const bool y = panel_->outcomes[r] != 0;
        const double eta = eta_[r];
        for (int q = 0; q < Q; ++q) {
          s[q] += log_bernoulli(y, eta + scale * rule_.nodes[q]);
        }
      }
      const double li = log_sum_exp(s.data(), Q);
      if (!std::isfinite(li)) {
        throw NumericError("non-finite likelihood for account " + panel_->account_ids[a]);
      }
      total += li;
    }
    return total;
  }

  double loglik_linear(double sigma_a, double sigma_b) const {
    const double sa = std::sqrt(2.0) * sigma_a;
    const double sb = std::sqrt(2.0) * sigma_b;
    const int Q = rule_.order;
    std::vector<double> s(static_cast<std::size_t>(Q) * Q);
    double total = 0.0;
    for (std::size_t a = 0; a < panel_->n_accounts(); ++a) {
      for (int q = 0; q < Q; ++q) {
        for (int r2 = 0; r2 < Q; ++r2) {
          s[static_cast<std::size_t>(q) * Q + r2] = log_wtilde_[q] + log_wtilde_[r2];
        }
      }
      for (std::size_t r = panel_->offsets[a]; r < panel_->offsets[a + 1]; ++r) {
        const bool y = panel_->outcomes[r] != 0;
        const double base = eta_[r];
        const double t = static_cast<double>(panel_->times[r]);
        for (int q = 0; q < Q; ++q) {
          const double with_slope = base + sa * rule_.nodes[q] * t;
          double* srow = s.data() + static_cast<std::size_t>(q) * Q;
          for (int r2 = 0; r2 < Q; ++r2) {
            srow[r2] += log_bernoulli(y, with_slope + sb * rule_.nodes[r2]);
          }
        }
      }
      const double li = log_sum_exp(s.data(), Q * Q);
      if (!std::isfinite(li)) {
        throw NumericError("non-finite likelihood for account " + panel_->account_ids[a]);
      }
      total += li;
    }
    return total;
  }

  double loglik_piecewise(const double* logsig) const {
    const int Q = rule_.order;
    const std::size_t n_seg = spec_.frailty.segments.size();
    std::vector<double> sigma(n_seg, 0.0);
    for (std::size_t k = 0; k < n_seg; ++k) {
      if (sigma_slot_[k] >= 0) sigma[k] = std::exp(logsig[sigma_slot_[k]]);
    }
    std::vector<double> s(Q);
    double total = 0.0;
    for (std::size_t a = 0; a < panel_->n_accounts(); ++a) {
      for (std::size_t k = 0; k < n_seg; ++k) {
        const std::size_t lo = panel_->offsets[a];
        const std::size_t hi = panel_->offsets[a + 1];
        bool any = false;
        if (sigma[k] == 0.0) {
          double direct = 0.0;
          for (std::size_t r = lo; r < hi; ++r) {
            if (segment_[r] != static_cast<int>(k)) continue;
            any = true;
            direct += log_bernoulli(panel_->outcomes[r] != 0, eta_[r]);
          }
          if (any) total += direct;
          continue;
        }
        const double scale = std::sqrt(2.0) * sigma[k];
        for (int q = 0; q < Q; ++q) s[q] = log_wtilde_[q];
        for (std::size_t r = lo; r < hi; ++r) {
          if (segment_[r] != static_cast<int>(k)) continue;
          any = true;
          const bool y = panel_->outcomes[r] != 0;
          const double eta = eta_[r];
          for (int q = 0; q < Q; ++q) {
            s[q] += log_bernoulli(y, eta + scale * rule_.nodes[q]);
          }
        }
        if (!any) continue;
        const double li = log_sum_exp(s.data(), Q);
        if (!std::isfinite(li)) {
          throw NumericError("non-finite likelihood for account " +
                             panel_->account_ids[a]);
        }
        total += li;
      }
    }
    return total;
  }

  void check_finite(double v, const char* what) const {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite ") + what + " log-likelihood");
    }
  }

  ModelSpec spec_;
  const TransitionPanel* panel_;
  std::vector<double> xsub_;
  std::vector<int> alpha_times_;
  std::vector<int> alpha_slot_;
  std::vector<int> segment_;
  std::vector<int> sigma_slot_;
  QuadratureRule rule_;
  std::vector<double> log_wtilde_;
  mutable std::vector<double> eta_;
};

// --- operation-shaped wrappers -------------------------------------------

inline double loglik_fixed(const ModelSpec& spec, const ParameterVector& params,
                           const TransitionPanel& panel) {
  if (spec.frailty.kind != FrailtyKind::none) {
    throw ConfigError("loglik_fixed requires frailty kind 'none'");
  }
  return TransitionLoglik(spec, panel).loglik(params);
}

inline double marginal_loglik_intercept(const ModelSpec& spec,
                                        const ParameterVector& params,
                                        const TransitionPanel& panel) {
  if (spec.frailty.kind != FrailtyKind::intercept) {
    throw ConfigError("marginal_loglik_intercept requires frailty kind 'intercept'");
  }
  return TransitionLoglik(spec, panel).loglik(params);
}

inline double marginal_loglik_linear(const ModelSpec& spec,
                                     const ParameterVector& params,
                                     const TransitionPanel& panel) {
  if (spec.frailty.kind != FrailtyKind::linear) {
    throw ConfigError("marginal_loglik_linear requires frailty kind 'linear'");
  }
  return TransitionLoglik(spec, panel).loglik(params);
}

inline double marginal_loglik_piecewise(const ModelSpec& spec,
                                        const ParameterVector& params,
                                        const TransitionPanel& panel) {
  if (spec.frailty.kind != FrailtyKind::piecewise) {
    throw ConfigError("marginal_loglik_piecewise requires frailty kind 'piecewise'");
  }
  return TransitionLoglik(spec, panel).loglik(params);
}

}  // namespace msfrail
