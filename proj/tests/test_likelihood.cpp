#include "msfrail/likelihood.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "msfrail/simulate.hpp"
#include "oracles.hpp"

namespace {

using namespace msfrail;

ModelSpec spec_for(FrailtyKind kind, const TransitionPanel& panel, int Q = 20) {
  ModelSpec spec;
  spec.pair = panel.pair;
  spec.covariate_names = panel.covariate_names;
  spec.quadrature_order = Q;
  switch (kind) {
    case FrailtyKind::none: spec.frailty = FrailtySpec::none(); break;
    case FrailtyKind::intercept: spec.frailty = FrailtySpec::intercept(); break;
    case FrailtyKind::linear: spec.frailty = FrailtySpec::linear(); break;
    case FrailtyKind::piecewise: spec.frailty = FrailtySpec::piecewise(); break;
  }
  return spec;
}

ParameterVector params_for(const ModelSpec& spec, const TransitionPanel& panel,
                           std::vector<double> beta, std::vector<double> log_sigma) {
  TransitionLoglik eval(spec, panel);
  auto p = eval.make_params();
  p.beta = std::move(beta);
  p.log_sigma = std::move(log_sigma);
  return p;
}

TEST(LinearPredictor, SpecExamples) {
  ParameterVector p;
  p.beta = {1.0, -2.0};
  std::vector<double> x = {1.0, 0.5};
  EXPECT_DOUBLE_EQ(linear_predictor(p, x, 1), 0.0);
  EXPECT_DOUBLE_EQ(linear_predictor(p, x, 1, 0.3), 0.3);
  ParameterVector zero;
  zero.beta = {};
  std::vector<double> none;
  EXPECT_NEAR(linear_predictor(zero, none, 4, 0.1, -0.2), 0.2, 1e-15);
}

TEST(LinearPredictor, DimensionMismatchThrows) {
  ParameterVector p;
  p.beta = {1.0};
  std::vector<double> x = {1.0, 2.0};
  EXPECT_THROW(linear_predictor(p, x, 1), ConfigError);
}

TEST(LoglikFixed, SingleRowAtZeroIsLogHalf) {
  auto panel = make_transition_panel({1, 1}, {"x"}, {{"a", 1, 1, {0.7}}});
  auto spec = spec_for(FrailtyKind::none, panel);
  auto params = params_for(spec, panel, {0.0}, {});
  EXPECT_NEAR(loglik_fixed(spec, params, panel), std::log(0.5), 1e-12);
}

TEST(LoglikFixed, AllZeroParamsGiveNLogHalf) {
  CounterRng rng(3);
  std::vector<TransitionRow> rows;
  for (int i = 0; i < 25; ++i) {
    rows.push_back({"a" + std::to_string(i), 1, rng.bernoulli(0.5) ? 1 : 0,
                    {rng.uniform(-1, 1), rng.uniform(-1, 1)}});
  }
  auto panel = make_transition_panel({1, 1}, {"x1", "x2"}, rows);
  auto spec = spec_for(FrailtyKind::none, panel);
  auto params = params_for(spec, panel, {0.0, 0.0}, {});
  EXPECT_NEAR(loglik_fixed(spec, params, panel), 25.0 * std::log(0.5), 1e-10);
}

TEST(LoglikFixed, MatchesHandComputedToyPanel) {
  auto panel = make_transition_panel({1, 3}, {"x1", "x2"},
                                     {{"a", 1, 1, {1.0, 0.5}},
                                      {"a", 2, 0, {-0.4, 1.2}},
                                      {"b", 1, 1, {0.0, -2.0}}});
  auto spec = spec_for(FrailtyKind::none, panel);
  auto params = params_for(spec, panel, {0.5, -1.2}, {});
  auto ll = [](int y, double eta) {
    const double p = 1.0 / (1.0 + std::exp(-eta));
    return y ? std::log(p) : std::log(1.0 - p);
  };
  const double expected = ll(1, 0.5 * 1.0 - 1.2 * 0.5) + ll(0, 0.5 * -0.4 - 1.2 * 1.2) +
                          ll(1, 0.5 * 0.0 - 1.2 * -2.0);
  EXPECT_NEAR(loglik_fixed(spec, params, panel), expected, 1e-12);
}

SimConfig small_config(double sigma, std::uint64_t seed, int n = 50) {
  SimConfig c;
  c.n_individuals = n;
  c.beta = {0.3, 0.5, -0.7};
  c.sigma = {sigma};
  c.seed = seed;
  return c;
}

TEST(MarginalIntercept, DegenerateSigmaEqualsFixed) {
  auto panel = simulate_frailty_panel(small_config(0.8, 11));
  auto spec_i = spec_for(FrailtyKind::intercept, panel);
  auto spec_f = spec_for(FrailtyKind::none, panel);
  std::vector<double> beta = {0.2, 0.4, -0.9};
  auto pi = params_for(spec_i, panel, beta, {-12.0});
  auto pf = params_for(spec_f, panel, beta, {});
  const double a = marginal_loglik_intercept(spec_i, pi, panel);
  const double b = loglik_fixed(spec_f, pf, panel);
  EXPECT_NEAR(a, b, 1e-8 * panel.n_rows());
}

TEST(MarginalIntercept, SymmetrySingleRowIsLogHalf) {
  auto panel = make_transition_panel({1, 1}, {"x"}, {{"a", 1, 1, {0.4}}});
  auto spec = spec_for(FrailtyKind::intercept, panel, 30);
  auto params = params_for(spec, panel, {0.0}, {0.0});  // sigma_u = 1
  EXPECT_NEAR(marginal_loglik_intercept(spec, params, panel), std::log(0.5), 1e-10);
}

TEST(MarginalIntercept, MatchesMonteCarloOracle) {
  for (double sigma : {0.25, 1.2}) {
    auto panel = simulate_frailty_panel(small_config(sigma, 21 + int(sigma * 10)));
    auto spec = spec_for(FrailtyKind::intercept, panel);
    std::vector<double> beta = {0.3, 0.5, -0.7};
    auto params = params_for(spec, panel, beta, {std::log(sigma)});
    const double ghq = marginal_loglik_intercept(spec, params, panel);
    auto mc = oracles::mc_marginal_intercept(panel, beta, sigma, 200000, 7777);
    EXPECT_NEAR(ghq, mc.value, 4.0 * mc.se) << "sigma=" << sigma;
  }
}

TEST(MarginalLinear, DegenerateCases) {
  auto panel = simulate_frailty_panel(small_config(0.5, 31));
  std::vector<double> beta = {0.1, 0.4, -0.5};

  auto spec_l = spec_for(FrailtyKind::linear, panel);
  auto spec_f = spec_for(FrailtyKind::none, panel);
  auto spec_i = spec_for(FrailtyKind::intercept, panel);

  auto pl = params_for(spec_l, panel, beta, {-12.0, -12.0});
  auto pf = params_for(spec_f, panel, beta, {});
  EXPECT_NEAR(marginal_loglik_linear(spec_l, pl, panel),
              loglik_fixed(spec_f, pf, panel), 1e-8 * panel.n_rows());

  auto pl2 = params_for(spec_l, panel, beta, {-12.0, std::log(0.7)});
  auto pi = params_for(spec_i, panel, beta, {std::log(0.7)});
  EXPECT_NEAR(marginal_loglik_linear(spec_l, pl2, panel),
              marginal_loglik_intercept(spec_i, pi, panel), 1e-8 * panel.n_rows());
}

TEST(MarginalLinear, MatchesMonteCarloOracle) {
  SimConfig c = small_config(0.0, 41);
  c.frailty = FrailtySpec::linear();
  c.sigma = {0.3, 0.8};
  auto panel = simulate_frailty_panel(c);
  auto spec = spec_for(FrailtyKind::linear, panel);
  std::vector<double> beta = {0.3, 0.5, -0.7};
  auto params = params_for(spec, panel, beta, {std::log(0.3), std::log(0.8)});
  const double ghq = marginal_loglik_linear(spec, params, panel);
  auto mc = oracles::mc_marginal_linear(panel, beta, 0.3, 0.8, 200000, 8888);
  EXPECT_NEAR(ghq, mc.value, 4.0 * mc.se);
}

TEST(MarginalPiecewise, DegenerateAndSingleSegment) {
  SimConfig c = small_config(0.0, 51);
  c.frailty = FrailtySpec::piecewise();
  c.sigma = {0.4, 0.6, 0.2};
  auto panel = simulate_frailty_panel(c);
  std::vector<double> beta = {0.2, 0.3, -0.4};

  auto spec_p = spec_for(FrailtyKind::piecewise, panel);
  auto spec_f = spec_for(FrailtyKind::none, panel);
  auto pp = params_for(spec_p, panel, beta, {-12.0, -12.0, -12.0});
  auto pf = params_for(spec_f, panel, beta, {});
  EXPECT_NEAR(marginal_loglik_piecewise(spec_p, pp, panel),
              loglik_fixed(spec_f, pf, panel), 1e-8 * panel.n_rows());

  // One segment covering every observed time reduces to the intercept model.
  ModelSpec one_seg = spec_p;
  one_seg.frailty = FrailtySpec::piecewise({{1, 6}});
  auto p1 = params_for(one_seg, panel, beta, {std::log(0.9)});
  auto spec_i = spec_for(FrailtyKind::intercept, panel);
  auto pi = params_for(spec_i, panel, beta, {std::log(0.9)});
  EXPECT_NEAR(marginal_loglik_piecewise(one_seg, p1, panel),
              marginal_loglik_intercept(spec_i, pi, panel), 1e-10 * panel.n_rows());
}

TEST(MarginalPiecewise, TwoSegmentAccountMatchesMonteCarlo) {
  SimConfig c = small_config(0.0, 61, 40);
  c.obs_min = 4;
  c.obs_max = 6;
  c.frailty = FrailtySpec::piecewise({{1, 3}, {4, 7}});
  c.sigma = {0.7, 1.1};
  auto panel = simulate_frailty_panel(c);
  auto spec = spec_for(FrailtyKind::piecewise, panel);
  spec.frailty = FrailtySpec::piecewise({{1, 3}, {4, 7}});
  std::vector<double> beta = {0.3, 0.5, -0.7};
  auto params = params_for(spec, panel, beta, {std::log(0.7), std::log(1.1)});
  const double ghq = marginal_loglik_piecewise(spec, params, panel);
  auto mc = oracles::mc_marginal_piecewise(panel, beta, {{1, 3}, {4, 7}}, {0.7, 1.1},
                                           200000, 9999);
  EXPECT_NEAR(ghq, mc.value, 4.0 * mc.se);
}

TEST(MarginalPiecewise, UncoveredTimeIsConfigError) {
  SimConfig c = small_config(0.3, 71, 10);
  c.obs_min = 6;
  c.obs_max = 6;
  auto panel = simulate_frailty_panel(c);
  ModelSpec spec = spec_for(FrailtyKind::piecewise, panel);
  spec.frailty = FrailtySpec::piecewise({{1, 3}});  // t in 4..6 uncovered
  EXPECT_THROW(TransitionLoglik(spec, panel), ConfigError);
}

TEST(Loglik, AccountOrderInvariance) {
  // Same rows presented in a different order produce bit-identical values.
  CounterRng rng(81);
  std::vector<TransitionRow> rows;
  for (int i = 0; i < 30; ++i) {
    const std::string id = "z" + std::to_string(99 - i);
    for (int t = 1; t <= 3; ++t) {
      rows.push_back({id, t, rng.bernoulli(0.4) ? 1 : 0, {1.0, rng.uniform(-1, 1)}});
    }
  }
  auto panel1 = make_transition_panel({1, 1}, {"intercept", "x1"}, rows);
  std::reverse(rows.begin(), rows.end());
  auto panel2 = make_transition_panel({1, 1}, {"intercept", "x1"}, rows);

  for (auto kind : {FrailtyKind::none, FrailtyKind::intercept, FrailtyKind::linear}) {
    auto spec = spec_for(kind, panel1);
    std::vector<double> ls;
    if (kind == FrailtyKind::intercept) ls = {std::log(0.8)};
    if (kind == FrailtyKind::linear) ls = {std::log(0.2), std::log(0.5)};
    auto p1 = params_for(spec, panel1, {0.1, -0.3}, ls);
    TransitionLoglik e1(spec, panel1), e2(spec, panel2);
    EXPECT_EQ(e1.loglik(p1), e2.loglik(p1)) << to_string(kind);
  }
}

TEST(Loglik, MonotoneQuadratureConvergence) {
  // Per-observation truncation error between successive orders. For sigma
  // up to ~1.2 the order-20 rule is already inside 1e-6 per observation; at
  // sigma 2.5 the integrand needs higher orders (measured ~5e-5/obs at
  // Q=20 vs Q=40), so the same bound is asserted one refinement level up.
  auto delta_per_obs = [](const TransitionPanel& panel, double sigma, int q_lo,
                          int q_hi) {
    std::vector<double> beta = {0.3, 0.5, -0.7};
    ModelSpec lo, hi;
    lo.pair = hi.pair = panel.pair;
    lo.covariate_names = hi.covariate_names = panel.covariate_names;
    lo.frailty = hi.frailty = FrailtySpec::intercept();
    lo.quadrature_order = q_lo;
    hi.quadrature_order = q_hi;
    TransitionLoglik e_lo(lo, panel), e_hi(hi, panel);
    auto p = e_lo.make_params();
    p.beta = beta;
    p.log_sigma = {std::log(sigma)};
    return std::abs(e_hi.loglik(p) - e_lo.loglik(p)) / panel.n_rows();
  };
  for (double sigma : {0.25, 0.8, 1.2}) {
    auto panel = simulate_frailty_panel(small_config(sigma, 91, 100));
    EXPECT_LE(delta_per_obs(panel, sigma, 20, 40), 1e-6) << "sigma=" << sigma;
  }
  {
    auto panel = simulate_frailty_panel(small_config(2.5, 91, 100));
    EXPECT_LE(delta_per_obs(panel, 2.5, 40, 80), 5e-6);
  }
}

TEST(Loglik, LabelFlipOfWellFitPointDecreasesLoglik) {
  // A point fit almost perfectly contributes ~0; flipping its label costs.
  std::vector<TransitionRow> rows = {{"a", 1, 1, {3.0}}, {"b", 1, 0, {-3.0}}};
  auto panel1 = make_transition_panel({1, 1}, {"x"}, rows);
  rows[0].outcome = 0;
  auto panel2 = make_transition_panel({1, 1}, {"x"}, rows);
  for (auto kind : {FrailtyKind::none, FrailtyKind::intercept}) {
    auto spec = spec_for(kind, panel1);
    std::vector<double> ls = kind == FrailtyKind::intercept
                                 ? std::vector<double>{std::log(0.5)}
                                 : std::vector<double>{};
    auto params = params_for(spec, panel1, {2.0}, ls);
    const double l1 = TransitionLoglik(spec, panel1).loglik(params);
    const double l2 = TransitionLoglik(spec, panel2).loglik(params);
    EXPECT_LT(l2, l1);
    EXPECT_TRUE(std::isfinite(l1) && std::isfinite(l2));
  }
}

TEST(Loglik, GradientRichardsonConsistency) {
  auto panel = simulate_frailty_panel(small_config(0.8, 101, 40));
  CounterRng rng(55);
  for (auto kind : {FrailtyKind::intercept, FrailtyKind::linear}) {
    auto spec = spec_for(kind, panel, 12);
    TransitionLoglik eval(spec, panel);
    auto obj = [&](const std::vector<double>& v) { return eval.loglik_packed(v); };
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x(eval.n_params());
      for (auto& v : x) v = rng.uniform(-0.8, 0.8);
      const double h = 1e-5;
      for (std::size_t k = 0; k < x.size(); ++k) {
        auto grad_at = [&](double step) {
          auto xp = x;
          xp[k] = x[k] + step;
          const double fp = obj(xp);
          xp[k] = x[k] - step;
          const double fm = obj(xp);
          return (fp - fm) / (2.0 * step);
        };
        const double g1 = grad_at(h);
        const double g2 = grad_at(h / 2.0);
        // Richardson: the h/2 estimate is 4x more accurate; they must agree.
        const double scale = std::max({1.0, std::abs(g1), std::abs(g2)});
        EXPECT_LE(std::abs(g1 - g2), 1e-5 * scale)
            << to_string(kind) << " trial " << trial << " param " << k;
      }
    }
  }
}

}  // namespace
