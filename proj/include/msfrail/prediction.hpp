#pragma once

// Marginal transition probabilities via GHQ, competing-risk adjustment,
// transition-matrix assembly and cumulative landing-state distributions.

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msfrail/data.hpp"
#include "msfrail/errors.hpp"
#include "msfrail/estimation.hpp"
#include "msfrail/likelihood.hpp"
#include "msfrail/quadrature.hpp"

namespace msfrail {

// Frailty-marginalized single-transition probability for one covariate row.
inline double predict_marginal(const FittedModel& fit, std::span<const double> x,
                               int t, const QuadratureRule& rule) {
  const auto& spec = fit.spec;
  if (x.size() != fit.params.beta.size()) {
    throw ConfigError("predict_marginal: covariate/beta dimension mismatch");
  }
  const double base = linear_predictor(fit.params, x, t);
  switch (spec.frailty.kind) {
    case FrailtyKind::none:
      return logistic(base);
    case FrailtyKind::intercept:
      return expect_gaussian_1d([&](double u) { return logistic(base + u); },
                                fit.params.sigma(0), rule);
    case FrailtyKind::linear: {
      const double td = static_cast<double>(t);
      return expect_gaussian_2d(
          [&](double a, double b) { return logistic(base + a * td + b); },
          fit.params.sigma(0), fit.params.sigma(1), rule);
    }
    case FrailtyKind::piecewise: {
      auto seg = spec.frailty.segment_index(t);
      if (!seg) {
        throw ConfigError("predict_marginal: time " + std::to_string(t) +
                          " outside piecewise frailty segments");
      }
      double sigma = 0.0;
      int slot = 0;
      for (std::size_t k = 0; k < spec.frailty.segments.size(); ++k) {
        if (spec.frailty.segment_pinned(k)) continue;
        if (static_cast<int>(k) == *seg) sigma = fit.params.sigma(slot);
        ++slot;
      }
      return expect_gaussian_1d([&](double u) { return logistic(base + u); },
                                sigma, rule);
    }
  }
  return 0.0;
}

inline double predict_marginal(const FittedModel& fit, std::span<const double> x, int t) {
  return predict_marginal(fit, x, t, gauss_hermite(fit.spec.quadrature_order));
}

struct ReconstructedRow {
  std::array<double, 3> probs{0.0, 0.0, 0.0};
  bool clamped = false;
  double raw_residual = 0.0;
};

// Fills the one unmodeled destination with the residual mass 1 - sum(modeled),
// clamped into [0, 1]. Rows that arrive complete pass through unchanged.
inline ReconstructedRow reconstruct_full_row(
    const std::array<std::optional<double>, 3>& modeled, int origin) {
  (void)origin;
  int missing = -1;
  int n_missing = 0;
  for (int j = 0; j < 3; ++j) {
    if (!modeled[j]) {
      missing = j;
      ++n_missing;
    }
  }
  if (n_missing >= 2) {
    throw ConfigError("reconstruct_full_row: more than one unmodeled destination");
  }
  ReconstructedRow out;
  for (int j = 0; j < 3; ++j) out.probs[j] = modeled[j].value_or(0.0);
  if (n_missing == 1) {
    const double residual = 1.0 - (out.probs[0] + out.probs[1] + out.probs[2]);
    out.raw_residual = residual;
    double v = residual;
    if (v < 0.0 || v > 1.0) {
      out.clamped = true;
      v = std::min(1.0, std::max(0.0, v));
    }
    out.probs[missing] = v;
  }
  return out;
}

// q~_j = q_j (1 - 1/2 sum_{k != j} q_k + 1/3 prod_{k != j} q_k) for three
// destinations; the product term has exactly one (unordered) pair.
inline std::array<double, 3> competing_adjust(const std::array<double, 3>& q) {
  std::array<double, 3> out{};
  for (int j = 0; j < 3; ++j) {
    const int k = (j + 1) % 3;
    const int r = (j + 2) % 3;
    out[j] = q[j] * (1.0 - 0.5 * (q[k] + q[r]) + (q[k] * q[r]) / 3.0);
  }
  return out;
}

struct NormalizedRow {
  std::array<double, 3> probs{0.0, 0.0, 0.0};
  bool degenerate = false;  // all-zero row replaced by the stay-put row
};

// Adjusted rows need not sum to one; dividing by the row sum makes the
// matrix stochastic so multi-step products remain distributions. An all-zero
// row degenerates to the identity row for the origin state.
inline NormalizedRow normalize_row(const std::array<double, 3>& adjusted, int origin) {
  NormalizedRow out;
  const double total = adjusted[0] + adjusted[1] + adjusted[2];
  if (total > 0.0) {
    for (int j = 0; j < 3; ++j) out.probs[j] = adjusted[j] / total;
  } else {
    out.degenerate = true;
    out.probs[origin - 1] = 1.0;
  }
  return out;
}

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 mat3_identity() {
  return {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

inline Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) {
      const double v = a[i][k];
      for (int j = 0; j < 3; ++j) c[i][j] += v * b[k][j];
    }
  }
  return c;
}

struct MatrixStep {
  int t = 0;
  Mat3 raw_adjusted{};  // before row normalization, kept for audit
  Mat3 matrix{};        // row-stochastic
  std::array<bool, 3> degenerate_row{false, false, false};
  std::array<bool, 3> clamped_row{false, false, false};
};

struct TransitionMatrixSequence {
  AccountId account_id;
  int origin = 0;  // state at t1
  int t1 = 0;
  int t2 = 0;
  std::vector<MatrixStep> steps;      // one per t in (t1, t2]
  Mat3 cumulative = mat3_identity();  // product over the steps
  std::array<double, 3> landing{0.0, 0.0, 0.0};  // e_origin * cumulative
};

// Covariate rows for one account, keyed by time.
struct CovariateHistory {
  AccountId account_id;
  std::map<int, std::vector<double>> rows;
};

inline std::map<AccountId, CovariateHistory> covariate_histories(const StatePanel& panel) {
  std::map<AccountId, CovariateHistory> out;
  for (const auto& r : panel.records) {
    auto& h = out[r.account_id];
    h.account_id = r.account_id;
    h.rows[r.time] = r.covariates;
  }
  return out;
}

// Per-fit mapping from panel covariate order to the fit's covariate order.
inline std::vector<std::size_t> covariate_mapping(
    const std::vector<std::string>& panel_names, const ModelSpec& spec) {
  std::vector<std::size_t> map;
  for (const auto& name : spec.covariate_names) {
    auto it = std::find(panel_names.begin(), panel_names.end(), name);
    if (it == panel_names.end()) {
      throw ConfigError("covariate '" + name + "' missing from the supplied history");
    }
    map.push_back(static_cast<std::size_t>(it - panel_names.begin()));
  }
  return map;
}

// Single-step matrices for t in (t1, t2], their product, and the landing
// distribution from the origin state. Rows are reconstructed, competing-risk
// adjusted, then normalized, in that order.
inline TransitionMatrixSequence build_matrix_sequence(
    const std::map<StatePair, FittedModel>& fits,
    const std::vector<std::string>& covariate_names, const CovariateHistory& history,
    int origin, int t1, int t2) {
  if (!(t1 < t2)) throw ConfigError("build_matrix_sequence: need t1 < t2");
  if (origin < 1 || origin > 3) throw ConfigError("build_matrix_sequence: bad origin");
  if (fits.empty()) throw ConfigError("build_matrix_sequence: no fitted models");

  std::map<StatePair, std::vector<std::size_t>> mapping;
  std::map<StatePair, QuadratureRule> rules;
  for (const auto& [pair, fit] : fits) {
    mapping[pair] = covariate_mapping(covariate_names, fit.spec);
    rules[pair] = gauss_hermite(fit.spec.quadrature_order);
  }

  TransitionMatrixSequence seq;
  seq.account_id = history.account_id;
  seq.origin = origin;
  seq.t1 = t1;
  seq.t2 = t2;

  std::vector<double> xbuf;
  for (int t = t1 + 1; t <= t2; ++t) {
    auto row_it = history.rows.find(t);
    if (row_it == history.rows.end()) {
      throw DataError("missing covariates for account " + history.account_id +
                      " at time " + std::to_string(t));
    }
    MatrixStep step;
    step.t = t;
    for (int h = 1; h <= 3; ++h) {
      std::array<std::optional<double>, 3> modeled;
      for (const auto& [pair, fit] : fits) {
        if (pair.from != h) continue;
        const auto& map = mapping[pair];
        xbuf.resize(map.size());
        for (std::size_t k = 0; k < map.size(); ++k) xbuf[k] = row_it->second[map[k]];
        modeled[pair.to - 1] = predict_marginal(fit, xbuf, t, rules[pair]);
      }
      auto rec = reconstruct_full_row(modeled, h);
      step.clamped_row[h - 1] = rec.clamped;
      auto adjusted = competing_adjust(rec.probs);
      step.raw_adjusted[h - 1] = adjusted;
      auto norm = normalize_row(adjusted, h);
      step.degenerate_row[h - 1] = norm.degenerate;
      step.matrix[h - 1] = norm.probs;
    }
    seq.cumulative = mat3_mul(seq.cumulative, step.matrix);
    seq.steps.push_back(step);
  }
  seq.landing = seq.cumulative[origin - 1];
  return seq;
}

}  // namespace msfrail
