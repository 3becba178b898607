#pragma once

// Synthetic data: binary frailty panels for the estimator comparison study,
// and a forward multistate trajectory generator for end-to-end checks.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "msfrail/data.hpp"
#include "msfrail/errors.hpp"
#include "msfrail/likelihood.hpp"
#include "msfrail/model.hpp"
#include "msfrail/prediction.hpp"
#include "msfrail/rng.hpp"

namespace msfrail {

// Binary panel with a shared per-individual frailty. Covariate laws:
// x1 ~ Uniform(-2,2), x2 ~ Bernoulli(0.5), and with four coefficients an
// extra x3 ~ Gamma(shape 1.2, scale 0.6). beta[0] multiplies the intercept
// column. Frailty kind picks between a shared intercept u_i, a linear
// a_i t + b_i, or per-segment u_ik.
struct SimConfig {
  int n_individuals = 10000;
  int obs_min = 1;
  int obs_max = 6;
  std::vector<double> beta;  // size 3 (b0,b1,b2) or 4 (adds b3 on x3)
  FrailtySpec frailty = FrailtySpec::intercept();
  std::vector<double> sigma;  // sizes: intercept 1, linear 2, piecewise per segment
  std::uint64_t seed = 1;
  StatePair pair{1, 1};  // label only
};

inline void validate(const SimConfig& c) {
  if (c.n_individuals < 1) throw ConfigError("simulate: n_individuals must be >= 1");
  if (c.obs_min < 1 || c.obs_max < c.obs_min) {
    throw ConfigError("simulate: invalid observations-per-individual range");
  }
  if (c.beta.size() != 3 && c.beta.size() != 4) {
    throw ConfigError("simulate: beta must have 3 or 4 entries");
  }
  const std::size_t want = [&] {
    switch (c.frailty.kind) {
      case FrailtyKind::none: return std::size_t{0};
      case FrailtyKind::intercept: return std::size_t{1};
      case FrailtyKind::linear: return std::size_t{2};
      case FrailtyKind::piecewise: return c.frailty.segments.size();
    }
    return std::size_t{0};
  }();
  if (c.sigma.size() != want) {
    throw ConfigError("simulate: sigma count does not match the frailty kind");
  }
  for (double s : c.sigma) {
    if (s < 0.0) throw ConfigError("simulate: sigma must be >= 0");
  }
}

namespace sim_detail {

inline std::string account_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "sim%07d", i);
  return buf;
}

}  // namespace sim_detail

inline TransitionPanel simulate_frailty_panel(const SimConfig& config) {
  validate(config);
  const bool with_x3 = config.beta.size() == 4;
  std::vector<std::string> names = {"intercept", "x1", "x2"};
  if (with_x3) names.push_back("x3");

  std::vector<TransitionRow> rows;
  for (int i = 0; i < config.n_individuals; ++i) {
    CounterRng meta(config.seed, static_cast<std::uint64_t>(i), 0);
    const int n_i =
        static_cast<int>(meta.uniform_int(config.obs_min, config.obs_max));

    CounterRng frailty_rng(config.seed, static_cast<std::uint64_t>(i), 1);
    double u = 0.0, slope = 0.0, icept = 0.0;
    std::vector<double> u_seg;
    switch (config.frailty.kind) {
      case FrailtyKind::none: break;
      case FrailtyKind::intercept: u = config.sigma[0] * frailty_rng.normal(); break;
      case FrailtyKind::linear:
        slope = config.sigma[0] * frailty_rng.normal();
        icept = config.sigma[1] * frailty_rng.normal();
        break;
      case FrailtyKind::piecewise:
        for (double s : config.sigma) u_seg.push_back(s * frailty_rng.normal());
        break;
    }

    const std::string id = sim_detail::account_name(i);
    for (int t = 1; t <= n_i; ++t) {
      CounterRng rng(config.seed, static_cast<std::uint64_t>(i),
                     2 + static_cast<std::uint64_t>(t));
      TransitionRow row;
      row.account_id = id;
      row.time = t;
      row.covariates = {1.0, rng.uniform(-2.0, 2.0),
                        rng.bernoulli(0.5) ? 1.0 : 0.0};
      if (with_x3) row.covariates.push_back(rng.gamma(1.2, 0.6));
      double eta = 0.0;
      for (std::size_t k = 0; k < config.beta.size(); ++k) {
        eta += config.beta[k] * row.covariates[k];
      }
      switch (config.frailty.kind) {
        case FrailtyKind::none: break;
        case FrailtyKind::intercept: eta += u; break;
        case FrailtyKind::linear: eta += slope * t + icept; break;
        case FrailtyKind::piecewise: {
          auto seg = config.frailty.segment_index(t);
          if (!seg) throw ConfigError("simulate: time outside piecewise segments");
          eta += u_seg[*seg];
          break;
        }
      }
      row.outcome = rng.bernoulli(logistic(eta)) ? 1 : 0;
      rows.push_back(std::move(row));
    }
  }
  return make_transition_panel(config.pair, names, std::move(rows));
}

// Built-in coefficient presets for the estimator comparison grid; rows 1-4
// use two covariates, rows 5-8 add the gamma covariate.
inline std::vector<double> grid_preset_beta(int row) {
  switch (row) {
    case 1: return {0.5, 0.5, -1.2};
    case 2: return {1.5, -0.8, 1.3};
    case 3: return {-1.438, 4.847, -0.444};
    case 4: return {1.476, -0.151, -1.735};
    case 5: return {2.5, 0.45, 0.25, -1.2};
    case 6: return {0.8, -0.9, 0.5, -1.7};
    case 7: return {1.8, -2.1, -0.5, -1.7};
    case 8: return {-1.24, 1.17, -1.04, 0.97};
  }
  throw ConfigError("grid preset row must be in 1..8");
}

// Forward simulation of three-state trajectories. Per-destination logits
// come from the per-pair coefficient vectors; the categorical step
// distribution is formed through the same reconstruct -> competing-adjust ->
// normalize path the prediction side uses.
struct MultistateSimConfig {
  int n_accounts = 1000;
  int horizon = 7;  // T <= 8
  std::map<StatePair, std::vector<double>> true_beta;  // over {intercept,x1,x2}
  FrailtyKind frailty = FrailtyKind::none;  // none or intercept
  double sigma = 0.0;
  std::array<double, 3> initial_dist{1.0, 0.0, 0.0};
  std::uint64_t seed = 1;
};

inline void validate(const MultistateSimConfig& c) {
  if (c.n_accounts < 1) throw ConfigError("simulate_multistate: n_accounts >= 1");
  if (c.horizon < 2 || c.horizon > 8) {
    throw ConfigError("simulate_multistate: horizon must be in [2, 8]");
  }
  if (c.true_beta.empty()) throw ConfigError("simulate_multistate: no transition types");
  for (const auto& [pair, beta] : c.true_beta) {
    if (beta.size() != 3) {
      throw ConfigError("simulate_multistate: coefficients must cover {intercept,x1,x2}");
    }
    if (pair.from < 1 || pair.from > 3 || pair.to < 1 || pair.to > 3) {
      throw ConfigError("simulate_multistate: bad transition pair");
    }
  }
  if (c.frailty != FrailtyKind::none && c.frailty != FrailtyKind::intercept) {
    throw ConfigError("simulate_multistate: frailty must be none or intercept");
  }
  double total = c.initial_dist[0] + c.initial_dist[1] + c.initial_dist[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("simulate_multistate: initial distribution must sum to 1");
  }
}

inline StatePanel simulate_multistate(const MultistateSimConfig& config) {
  validate(config);
  StatePanel panel;
  panel.covariate_names = {"intercept", "x1", "x2"};

  for (int i = 0; i < config.n_accounts; ++i) {
    const std::string id = sim_detail::account_name(i);
    CounterRng init_rng(config.seed, static_cast<std::uint64_t>(i), 0);
    int state = 1;
    {
      const double r = init_rng.uniform();
      if (r < config.initial_dist[0]) {
        state = 1;
      } else if (r < config.initial_dist[0] + config.initial_dist[1]) {
        state = 2;
      } else {
        state = 3;
      }
    }
    std::map<StatePair, double> frailty;
    if (config.frailty == FrailtyKind::intercept) {
      CounterRng frng(config.seed, static_cast<std::uint64_t>(i), 1);
      for (const auto& [pair, beta] : config.true_beta) {
        frailty[pair] = config.sigma * frng.normal();
      }
    }

    for (int t = 1; t <= config.horizon; ++t) {
      CounterRng rng(config.seed, static_cast<std::uint64_t>(i),
                     2 + static_cast<std::uint64_t>(t));
      std::vector<double> x = {1.0, rng.uniform(-2.0, 2.0),
                               rng.bernoulli(0.5) ? 1.0 : 0.0};
      panel.records.push_back({id, t, state, x});
      if (t == config.horizon) break;

      // Next state sampled at t+1 given covariates drawn at t+1.
      CounterRng step_rng(config.seed, static_cast<std::uint64_t>(i),
                          2 + static_cast<std::uint64_t>(t + 1));
      std::vector<double> x_next = {1.0, step_rng.uniform(-2.0, 2.0),
                                    step_rng.bernoulli(0.5) ? 1.0 : 0.0};
      std::array<std::optional<double>, 3> modeled;
      for (const auto& [pair, beta] : config.true_beta) {
        if (pair.from != state) continue;
        double eta = 0.0;
        for (std::size_t k = 0; k < 3; ++k) eta += beta[k] * x_next[k];
        if (config.frailty == FrailtyKind::intercept) eta += frailty[pair];
        modeled[pair.to - 1] = logistic(eta);
      }
      auto row = reconstruct_full_row(modeled, state);
      auto adjusted = competing_adjust(row.probs);
      auto dist = normalize_row(adjusted, state);
      const double r = step_rng.uniform();
      state = r < dist.probs[0] ? 1 : (r < dist.probs[0] + dist.probs[1] ? 2 : 3);

      // The drawn covariates for t+1 are re-derived next loop turn from the
      // same keyed stream, so the panel row matches what the step used.
    }
  }
  return panel;
}

}  // namespace msfrail
