#pragma once

// EM estimation with GHQ in the E-step: (1) fixed-effects initialization,
// (2) per-account conditional expectations through GHQ ratio weights,
// (3) minimization of the negative expected complete-data log-likelihood,
// (4) stop when the parameter step falls under epsilon.
//
// The M-step objective keeps the GHQ substitution u_q = sqrt(2) sigma z_q
// inside the Bernoulli terms (candidate sigmas move the nodes) while the
// Gaussian prior is evaluated at the E-step grid values u_q^(k), so its
// quadratic part retains the 1/sigma^2 pull. The prior enters once per
// observation, following the per-(i,t) form of the expected complete-data
// log-likelihood.

#include <cmath>
#include <optional>
#include <vector>

#include "msfrail/estimation.hpp"
#include "msfrail/likelihood.hpp"
#include "msfrail/model.hpp"
#include "msfrail/optim.hpp"

namespace msfrail {

struct EmConfig {
  double epsilon = 1e-5;
  int max_iter = 200;
  OptimOptions mstep_optim = [] {
    OptimOptions o;
    o.max_iter = 60;
    o.grad_tol = 1e-7;
    return o;
  }();
  double sigma_init = 0.5;
  bool compute_hessian = true;
  double log_sigma_floor = -15.0;
  double log_sigma_cap = 3.0;
};

namespace em_detail {

struct EStep {
  // weights laid out per account: Q (intercept), Q*Q (linear),
  // n_segments*Q (piecewise).
  std::vector<double> w;
  std::size_t stride = 0;
  // Posterior second moments of the E-step grid values, per account and
  // variance component: E[u^2 | y] with u = sqrt(2) sigma^(k) z.
  std::vector<double> u2;
  std::size_t u2_stride = 0;
};

inline void softmax_inplace(double* s, int n) {
  double m = s[0];
  for (int i = 1; i < n; ++i) m = std::max(m, s[i]);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    s[i] = std::exp(s[i] - m);
    acc += s[i];
  }
  for (int i = 0; i < n; ++i) s[i] /= acc;
}

inline EStep e_step(const TransitionLoglik& eval, const TransitionPanel& panel,
                    const ParameterVector& params, std::vector<double>& eta) {
  eval.compute_eta(params.alpha.data(), params.beta.data(), eta);
  const auto& rule = eval.rule();
  const auto& lw = eval.log_wtilde();
  const int Q = rule.order;
  const std::size_t n_acc = panel.n_accounts();
  EStep out;

  switch (eval.spec().frailty.kind) {
    case FrailtyKind::intercept: {
      out.stride = static_cast<std::size_t>(Q);
      out.w.assign(n_acc * out.stride, 0.0);
      out.u2_stride = 1;
      out.u2.assign(n_acc, 0.0);
      const double scale = std::sqrt(2.0) * params.sigma(0);
      for (std::size_t a = 0; a < n_acc; ++a) {
        double* s = out.w.data() + a * out.stride;
        for (int q = 0; q < Q; ++q) s[q] = lw[q];
        for (std::size_t r = panel.offsets[a]; r < panel.offsets[a + 1]; ++r) {
          const bool y = panel.outcomes[r] != 0;
          for (int q = 0; q < Q; ++q) {
            s[q] += log_bernoulli(y, eta[r] + scale * rule.nodes[q]);
          }
        }
        softmax_inplace(s, Q);
        double m2 = 0.0;
        for (int q = 0; q < Q; ++q) {
          const double u = scale * rule.nodes[q];
          m2 += s[q] * u * u;
        }
        out.u2[a] = m2;
      }
      break;
    }
    case FrailtyKind::linear: {
      out.stride = static_cast<std::size_t>(Q) * Q;
      out.w.assign(n_acc * out.stride, 0.0);
      out.u2_stride = 2;
      out.u2.assign(n_acc * 2, 0.0);
      const double sa = std::sqrt(2.0) * params.sigma(0);
      const double sb = std::sqrt(2.0) * params.sigma(1);
      for (std::size_t a = 0; a < n_acc; ++a) {
        double* s = out.w.data() + a * out.stride;
        for (int q = 0; q < Q; ++q) {
          for (int r2 = 0; r2 < Q; ++r2) s[q * Q + r2] = lw[q] + lw[r2];
        }
        for (std::size_t r = panel.offsets[a]; r < panel.offsets[a + 1]; ++r) {
          const bool y = panel.outcomes[r] != 0;
          const double t = panel.times[r];
          for (int q = 0; q < Q; ++q) {
            const double base = eta[r] + sa * rule.nodes[q] * t;
            double* srow = s + q * Q;
            for (int r2 = 0; r2 < Q; ++r2) {
              srow[r2] += log_bernoulli(y, base + sb * rule.nodes[r2]);
            }
          }
        }
        softmax_inplace(s, Q * Q);
        double m2a = 0.0, m2b = 0.0;
        for (int q = 0; q < Q; ++q) {
          const double ua = sa * rule.nodes[q];
          for (int r2 = 0; r2 < Q; ++r2) {
            const double ub = sb * rule.nodes[r2];
            const double w = s[q * Q + r2];
            m2a += w * ua * ua;
            m2b += w * ub * ub;
          }
        }
        out.u2[a * 2] = m2a;
        out.u2[a * 2 + 1] = m2b;
      }
      break;
    }
    case FrailtyKind::piecewise: {
      const auto& segs = eval.spec().frailty.segments;
      const auto& slots = eval.sigma_slots();
      out.stride = segs.size() * static_cast<std::size_t>(Q);
      out.w.assign(n_acc * out.stride, 0.0);
      out.u2_stride = segs.size();
      out.u2.assign(n_acc * segs.size(), 0.0);
      for (std::size_t a = 0; a < n_acc; ++a) {
        for (std::size_t k = 0; k < segs.size(); ++k) {
          double* s = out.w.data() + a * out.stride + k * Q;
          const double sigma = slots[k] >= 0 ? params.sigma(slots[k]) : 0.0;
          const double scale = std::sqrt(2.0) * sigma;
          for (int q = 0; q < Q; ++q) s[q] = lw[q];
          for (std::size_t r = panel.offsets[a]; r < panel.offsets[a + 1]; ++r) {
            if (eval.row_segments()[r] != static_cast<int>(k)) continue;
            const bool y = panel.outcomes[r] != 0;
            for (int q = 0; q < Q; ++q) {
              s[q] += log_bernoulli(y, eta[r] + scale * rule.nodes[q]);
            }
          }
          softmax_inplace(s, Q);
          double m2 = 0.0;
          for (int q = 0; q < Q; ++q) {
            const double u = scale * rule.nodes[q];
            m2 += s[q] * u * u;
          }
          out.u2[a * segs.size() + k] = m2;
        }
      }
      break;
    }
    default:
      throw ConfigError("fit_em: frailty kind must be intercept, linear or piecewise");
  }
  return out;
}

}  // namespace em_detail

inline FittedModel fit_em(const ModelSpec& spec, const TransitionPanel& panel,
                          const std::optional<ParameterVector>& init = std::nullopt,
                          const EmConfig& config = {}) {
  if (spec.frailty.kind == FrailtyKind::none) {
    throw ConfigError("fit_em: frailty kind must be intercept, linear or piecewise");
  }
  if (panel.n_rows() == 0) throw DataError("fit_em: empty panel");
  TransitionLoglik eval(spec, panel);

  ParameterVector params = eval.make_params(config.sigma_init);
  if (init) {
    if (init->size() != eval.n_params()) {
      throw ConfigError("fit_em: init parameter vector does not match the design");
    }
    params = *init;
  } else {
    ModelSpec fixed = spec;
    fixed.frailty = FrailtySpec::none();
    FitConfig fc;
    fc.compute_hessian = false;
    auto fit0 = fit_mle(fixed, panel, std::nullopt, fc);
    params.alpha = fit0.params.alpha;
    params.beta = fit0.params.beta;
  }

  const auto& rule = eval.rule();
  const int Q = rule.order;
  const std::size_t n_acc = panel.n_accounts();
  const double W = static_cast<double>(panel.n_rows());
  const std::size_t n_alpha = eval.n_alpha();
  const std::size_t n_beta = eval.n_beta();

  std::vector<double> eta;
  bool converged = false;
  int iter = 0;

  for (; iter < config.max_iter; ++iter) {
    auto est = em_detail::e_step(eval, panel, params, eta);

    // Prior bookkeeping: one log g(u) term per observation, with the
    // quadratic part using the account's posterior second moment of the
    // E-step grid values. prior_count[c] rows carry component c;
    // prior_u2[c] = sum over rows of E[u_c^2 | y].
    std::vector<double> prior_count, prior_u2;
    switch (spec.frailty.kind) {
      case FrailtyKind::intercept: {
        prior_count = {W};
        double b = 0.0;
        for (std::size_t a = 0; a < n_acc; ++a) {
          b += static_cast<double>(panel.offsets[a + 1] - panel.offsets[a]) * est.u2[a];
        }
        prior_u2 = {b};
        break;
      }
      case FrailtyKind::linear: {
        prior_count = {W, W};
        double ba = 0.0, bb = 0.0;
        for (std::size_t a = 0; a < n_acc; ++a) {
          const double n_a = static_cast<double>(panel.offsets[a + 1] - panel.offsets[a]);
          ba += n_a * est.u2[a * 2];
          bb += n_a * est.u2[a * 2 + 1];
        }
        prior_u2 = {ba, bb};
        break;
      }
      case FrailtyKind::piecewise: {
        const auto& segs = spec.frailty.segments;
        const auto& slots = eval.sigma_slots();
        prior_count.assign(eval.n_sigma(), 0.0);
        prior_u2.assign(eval.n_sigma(), 0.0);
        for (std::size_t a = 0; a < n_acc; ++a) {
          for (std::size_t r = panel.offsets[a]; r < panel.offsets[a + 1]; ++r) {
            const int k = eval.row_segments()[r];
            if (slots[k] < 0) continue;
            prior_count[slots[k]] += 1.0;
            prior_u2[slots[k]] += est.u2[a * segs.size() + k];
          }
        }
        break;
      }
      default:
        break;
    }

    auto objective = [&](const std::vector<double>& v) -> double {
      const double* alpha = v.data();
      const double* beta = v.data() + n_alpha;
      const double* logsig = beta + n_beta;
      std::vector<double> eta_m;
      eval.compute_eta(alpha, beta, eta_m);
      double neg = 0.0;
      switch (spec.frailty.kind) {
        case FrailtyKind::intercept: {
          const double ls = std::clamp(logsig[0], config.log_sigma_floor,
                                       config.log_sigma_cap);
          const double scale = std::sqrt(2.0) * std::exp(ls);
          for (std::size_t a = 0; a < n_acc; ++a) {
            const double* w = est.w.data() + a * est.stride;
            for (std::size_t r = panel.offsets[a]; r < panel.offsets[a + 1]; ++r) {
              const bool y = panel.outcomes[r] != 0;
              double acc = 0.0;
              for (int q = 0; q < Q; ++q) {
                acc += w[q] * log_bernoulli(y, eta_m[r] + scale * rule.nodes[q]);
              }
              neg -= acc;
            }
          }
          neg += prior_count[0] * ls + 0.5 * prior_u2[0] * std::exp(-2.0 * ls);
          break;
        }
        case FrailtyKind::linear: {
          const double lsa = std::clamp(logsig[0], config.log_sigma_floor,
                                        config.log_sigma_cap);
          const double lsb = std::clamp(logsig[1], config.log_sigma_floor,
                                        config.log_sigma_cap);
          const double sa = std::sqrt(2.0) * std::exp(lsa);
          const double sb = std::sqrt(2.0) * std::exp(lsb);
          for (std::size_t a = 0; a < n_acc; ++a) {
            const double* w = est.w.data() + a * est.stride;
            for (std::size_t r = panel.offsets[a]; r < panel.offsets[a + 1]; ++r) {
              const bool y = panel.outcomes[r] != 0;
              const double t = panel.times[r];
              double acc = 0.0;
              for (int q = 0; q < Q; ++q) {
                const double base = eta_m[r] + sa * rule.nodes[q] * t;
                const double* wrow = w + q * Q;
                for (int r2 = 0; r2 < Q; ++r2) {
                  acc += wrow[r2] * log_bernoulli(y, base + sb * rule.nodes[r2]);
                }
              }
              neg -= acc;
            }
          }
          neg += prior_count[0] * lsa + 0.5 * prior_u2[0] * std::exp(-2.0 * lsa);
          neg += prior_count[1] * lsb + 0.5 * prior_u2[1] * std::exp(-2.0 * lsb);
          break;
        }
        case FrailtyKind::piecewise: {
          const auto& segs = spec.frailty.segments;
          const auto& slots = eval.sigma_slots();
          std::vector<double> scale(segs.size(), 0.0), ls(segs.size(), 0.0);
          for (std::size_t k = 0; k < segs.size(); ++k) {
            if (slots[k] >= 0) {
              ls[k] = std::clamp(logsig[slots[k]], config.log_sigma_floor,
                                 config.log_sigma_cap);
              scale[k] = std::sqrt(2.0) * std::exp(ls[k]);
            }
          }
          for (std::size_t a = 0; a < n_acc; ++a) {
            for (std::size_t r = panel.offsets[a]; r < panel.offsets[a + 1]; ++r) {
              const int k = eval.row_segments()[r];
              const bool y = panel.outcomes[r] != 0;
              const double* w = est.w.data() + a * est.stride + k * Q;
              double acc = 0.0;
              for (int q = 0; q < Q; ++q) {
                acc += w[q] * log_bernoulli(y, eta_m[r] + scale[k] * rule.nodes[q]);
              }
              neg -= acc;
            }
          }
          for (std::size_t c = 0; c < prior_count.size(); ++c) {
            int slot_ls = -1;
            for (std::size_t k = 0; k < segs.size(); ++k) {
              if (slots[k] == static_cast<int>(c)) slot_ls = static_cast<int>(k);
            }
            const double lsk = slot_ls >= 0 ? ls[slot_ls] : 0.0;
            neg += prior_count[c] * lsk + 0.5 * prior_u2[c] * std::exp(-2.0 * lsk);
          }
          break;
        }
        default:
          break;
      }
      return neg;
    };

    auto res = bfgs_minimize(objective, params.packed(), config.mstep_optim);
    double delta2 = 0.0;
    const auto prev = params.packed();
    for (std::size_t i = 0; i < prev.size(); ++i) {
      const double d = res.x[i] - prev[i];
      delta2 += d * d;
    }
    params.set_packed(res.x);
    for (auto& ls : params.log_sigma) {
      ls = std::clamp(ls, config.log_sigma_floor, config.log_sigma_cap);
    }
    if (std::sqrt(delta2) < config.epsilon) {
      converged = true;
      ++iter;
      break;
    }
  }

  FittedModel fit;
  fit.spec = spec;
  fit.params = params;
  fit.loglik = eval.loglik(params);
  fit.converged = converged;
  fit.iterations = iter;
  fit.param_names = eval.param_names();
  fit.separation_warning = detail::detect_separation(panel);
  if (config.compute_hessian) {
    auto marginal = [&eval](const std::vector<double>& v) { return -eval.loglik_packed(v); };
    fit.hessian = finite_diff_hessian(marginal, params.packed());
    fit.se.assign(fit.hessian.rows, std::numeric_limits<double>::quiet_NaN());
    auto inv = spd_inverse(fit.hessian);
    if (inv) {
      fit.se_valid = true;
      for (std::size_t i = 0; i < fit.hessian.rows; ++i) {
        if ((*inv)(i, i) > 0.0) fit.se[i] = std::sqrt((*inv)(i, i));
      }
    }
  }
  return fit;
}

}  // namespace msfrail
