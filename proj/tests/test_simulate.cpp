#include "doctest.h"

#include <cmath>
#include <numeric>

#include "survci/baseline.hpp"
#include "survci/concordance.hpp"
#include "survci/simulate.hpp"
#include "test_util.hpp"

using namespace survci;

namespace {

SimulationConfig basic_config(std::size_t m, std::uint64_t seed) {
  SimulationConfig config;
  config.m = m;
  config.beta = Eigen::VectorXd::Zero(1);
  config.covariates = {{"z", CovariateSpec::Dist::standard_normal, 0, 1}};
  config.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("generate_cohort is deterministic per seed") {
  SimulationConfig config = basic_config(50, 99);
  config.beta[0] = 0.4;
  config.censoring = {CensoringSpec::Kind::independent_exponential, 0.0, 0.5};
  config.groups.kind = GroupRule::Kind::multinomial;
  config.groups.labels = {"a", "b"};
  config.groups.probs = {0.3, 0.7};

  const TruthBundle x = generate_cohort(config);
  const TruthBundle y = generate_cohort(config);
  REQUIRE(x.cohort.size() == y.cohort.size());
  for (std::size_t i = 0; i < x.cohort.size(); ++i) {
    CHECK(x.cohort.records[i].observed_time == y.cohort.records[i].observed_time);
    CHECK(x.cohort.records[i].event == y.cohort.records[i].event);
    CHECK(x.cohort.records[i].group == y.cohort.records[i].group);
    CHECK(x.cohort.records[i].covariates == y.cohort.records[i].covariates);
  }
  config.seed = 100;
  const TruthBundle z = generate_cohort(config);
  bool any_different = false;
  for (std::size_t i = 0; i < x.cohort.size(); ++i) {
    any_different = any_different || x.cohort.records[i].observed_time !=
                                         z.cohort.records[i].observed_time;
  }
  CHECK(any_different);
}

TEST_CASE("observed time and event flag follow min(T, D)") {
  SimulationConfig config = basic_config(200, 5);
  config.censoring = {CensoringSpec::Kind::both, 2.0, 0.3};
  const TruthBundle truth = generate_cohort(config);
  for (const auto& rec : truth.cohort.records) {
    const double t = truth.true_event_times.at(rec.id);
    const double d = truth.censor_times.at(rec.id);
    CHECK(rec.observed_time == std::min(t, d));
    CHECK(rec.event == (t < d));
    CHECK(truth.true_hazards.rates.at(rec.id) > 0.0);
  }
}

TEST_CASE("exponential cohort means match the closed form") {
  const TruthBundle truth = generate_cohort(basic_config(10000, 42));
  double mean = 0.0;
  for (const auto& rec : truth.cohort.records) {
    CHECK(rec.event);
    mean += rec.observed_time;
  }
  mean /= static_cast<double>(truth.cohort.size());
  CHECK(std::abs(mean - 1.0) < 0.03);  // 3 standard errors
}

TEST_CASE("administrative censoring mass matches the survival beyond the cutoff") {
  SimulationConfig config = basic_config(10000, 43);
  config.censoring = {CensoringSpec::Kind::administrative, 1.0, 0.0};
  const TruthBundle truth = generate_cohort(config);
  double censored = 0.0;
  for (const auto& rec : truth.cohort.records) {
    censored += rec.event ? 0.0 : 1.0;
    if (!rec.event) CHECK(rec.observed_time == 1.0);
  }
  censored /= static_cast<double>(truth.cohort.size());
  CHECK(std::abs(censored - std::exp(-1.0)) < 0.015);
}

TEST_CASE("inverse-transform sampling reproduces the survival curve") {
  const double h = 2.0;
  for (int which = 0; which < 2; ++which) {
    const BaselineSpec spec = which == 0
                                  ? BaselineSpec{ExponentialBaseline{1.0}}
                                  : BaselineSpec{WeibullBaseline{2.0, 1.0}};
    SimulationConfig config;
    config.m = 100000;
    config.baseline = spec;
    config.beta = Eigen::VectorXd::Constant(1, 1.0);
    config.covariates = {{"z", CovariateSpec::Dist::uniform,
                          std::log(h), std::log(h) + 1e-12}};
    config.seed = 77 + static_cast<std::uint64_t>(which);
    const TruthBundle truth = generate_cohort(config);
    for (int k = 1; k <= 10; ++k) {
      const double t = 0.15 * k;
      double empirical = 0.0;
      for (const auto& rec : truth.cohort.records) {
        empirical += rec.observed_time >= t ? 1.0 : 0.0;
      }
      empirical /= static_cast<double>(config.m);
      const double expected = std::pow(baseline_survival(spec, t), h);
      CHECK(std::abs(empirical - expected) < 0.01);
    }
  }
}

TEST_CASE("step baselines sample exactly on the knot set") {
  SimulationConfig config;
  config.m = 50000;
  config.baseline = StepBaselineSpec{{1.0, 2.0}, {0.5, 0.0}};
  config.beta = Eigen::VectorXd::Zero(1);
  config.covariates = {{"z", CovariateSpec::Dist::standard_normal, 0, 1}};
  config.seed = 11;
  const TruthBundle truth = generate_cohort(config);
  double at_one = 0.0;
  for (const auto& rec : truth.cohort.records) {
    CHECK((rec.observed_time == 1.0 || rec.observed_time == 2.0));
    at_one += rec.observed_time == 1.0 ? 1.0 : 0.0;
  }
  CHECK(std::abs(at_one / static_cast<double>(config.m) - 0.5) < 0.01);

  // Positive tail mass without censoring cannot produce finite observations.
  SimulationConfig bad = config;
  bad.baseline = StepBaselineSpec{{1.0}, {0.4}};
  CHECK_THROWS_AS(generate_cohort(bad), std::invalid_argument);
  bad.censoring = {CensoringSpec::Kind::administrative, 5.0, 0.0};
  const TruthBundle truncated = generate_cohort(bad);
  CHECK(truncated.cohort.size() == bad.m);
}

TEST_CASE("config validation rejects bad fields") {
  SimulationConfig config = basic_config(1, 0);
  CHECK_THROWS_AS(generate_cohort(config), std::invalid_argument);
  config = basic_config(10, 0);
  config.beta = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(generate_cohort(config), std::invalid_argument);
  config = basic_config(10, 0);
  config.baseline = ExponentialBaseline{-1.0};
  CHECK_THROWS_AS(generate_cohort(config), std::invalid_argument);
  config = basic_config(10, 0);
  config.groups.kind = GroupRule::Kind::multinomial;
  config.groups.labels = {"a", "b"};
  config.groups.probs = {0.4, 0.4};
  CHECK_THROWS_AS(generate_cohort(config), std::invalid_argument);
}

TEST_CASE("monte carlo win probability approaches the closed form") {
  const BaselineSpec expo = ExponentialBaseline{1.0};
  CHECK(std::abs(monte_carlo_win_probability(expo, 1.0, 3.0, 100000, 1) - 0.75) < 0.01);
  CHECK(std::abs(monte_carlo_win_probability(expo, 2.0, 2.0, 100000, 2) - 0.5) < 0.01);

  const BaselineSpec weib = WeibullBaseline{2.0, 1.0};
  const double a = monte_carlo_win_probability(expo, 1.0, 3.0, 100000, 3);
  const double b = monte_carlo_win_probability(weib, 1.0, 3.0, 100000, 4);
  CHECK(std::abs(a - b) < 0.01);
  CHECK_THROWS_AS(monte_carlo_win_probability(expo, 1.0, 1.0, 0, 1), std::invalid_argument);
}

TEST_CASE("a fixed cutoff inflates every censored inversion") {
  // Administrative cutoff far below every member's restricted mean, so the
  // inverted hazard of a censored member always exceeds the true one.
  SimulationConfig config;
  config.m = 2000;
  config.baseline = ExponentialBaseline{0.2};
  config.beta = Eigen::VectorXd::Constant(1, 0.5);
  config.covariates = {{"z", CovariateSpec::Dist::uniform, -1.0, 1.0}};
  config.censoring = {CensoringSpec::Kind::administrative, 2.0, 0.0};
  config.seed = 31;
  const TruthBundle truth = generate_cohort(config);
  const BaselineSurvival dense = discretize_baseline(config.baseline, 60.0, 6000);
  const ObservedHazards inverted = observed_hazards(truth.cohort, dense);
  std::size_t censored = 0, inflated = 0;
  for (const auto& rec : truth.cohort.records) {
    if (rec.event) continue;
    ++censored;
    const double h_true = truth.true_hazards.rates.at(rec.id);
    if (inverted.hazards.at(rec.id) >= h_true - 1e-9) ++inflated;
  }
  REQUIRE(censored > 100);
  CHECK(inflated == censored);
}

TEST_CASE("censored inversions exceed the true hazard in expectation") {
  // Random censoring now; the inequality holds on average across cohorts.
  SimulationConfig config;
  config.m = 40;
  config.baseline = ExponentialBaseline{1.0};
  config.beta = Eigen::VectorXd::Zero(1);
  config.covariates = {{"z", CovariateSpec::Dist::standard_normal, 0, 1}};
  config.censoring = {CensoringSpec::Kind::independent_exponential, 0.0, 0.6};
  const BaselineSurvival dense = discretize_baseline(config.baseline, 50.0, 3000);

  double total_gap = 0.0;
  std::size_t censored = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    config.seed = 10000 + s;
    const TruthBundle truth = generate_cohort(config);
    const ObservedHazards inverted = observed_hazards(truth.cohort, dense);
    for (const auto& rec : truth.cohort.records) {
      if (rec.event) continue;
      ++censored;
      total_gap += inverted.hazards.at(rec.id) - truth.true_hazards.rates.at(rec.id);
    }
  }
  REQUIRE(censored > 5000);
  CHECK(total_gap / static_cast<double>(censored) > 0.0);
}

TEST_CASE("realized c-index distribution and determinism") {
  SimulationConfig config;
  config.m = 100;
  config.baseline = ExponentialBaseline{1.0};
  config.beta = Eigen::VectorXd::Constant(1, 0.8);
  config.covariates = {{"z", CovariateSpec::Dist::standard_normal, 0, 1}};
  config.seed = 9;

  const auto a = monte_carlo_realized_ci(config, ModelRule::true_model, 50, 7);
  const auto b = monte_carlo_realized_ci(config, ModelRule::true_model, 50, 7);
  CHECK(a == b);
  REQUIRE(a.size() == 50);

  // Mean realized CI approaches the analytic expected c-index.
  const auto many = monte_carlo_realized_ci(config, ModelRule::true_model, 200, 8);
  double mean = std::accumulate(many.begin(), many.end(), 0.0) /
                static_cast<double>(many.size());
  const TruthBundle truth = generate_cohort(config);
  PredictionModel model;
  for (const auto& [id, h] : truth.true_hazards.rates) {
    model.predicted_survival[id] = 1.0 / h;
  }
  const double analytic = expected_c_index(truth.cohort, truth.true_hazards, model);
  CHECK(std::abs(mean - analytic) < 0.02);
}

TEST_CASE("near-equal hazards put the realized c-index at one half") {
  SimulationConfig config;
  config.m = 150;
  config.baseline = ExponentialBaseline{1.0};
  config.beta = Eigen::VectorXd::Constant(1, 1e-9);
  config.covariates = {{"z", CovariateSpec::Dist::standard_normal, 0, 1}};
  config.seed = 12;
  const auto values = monte_carlo_realized_ci(config, ModelRule::true_model, 200, 5);
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                      static_cast<double>(values.size());
  CHECK(std::abs(mean - 0.5) < 0.02);
}

TEST_CASE("true ordering beats a fixed wrong ordering replicate by replicate") {
  SimulationConfig config;
  config.m = 120;
  config.baseline = ExponentialBaseline{1.0};
  config.beta = Eigen::VectorXd::Constant(1, 1.0);
  config.covariates = {{"z", CovariateSpec::Dist::standard_normal, 0, 1}};
  config.seed = 2;
  double true_mean = 0.0, wrong_mean = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    SimulationConfig redraw = config;
    redraw.seed = 500 + s;
    const TruthBundle fresh = generate_cohort(redraw);
    PredictionModel t, w;
    for (const auto& [id, h] : fresh.true_hazards.rates) {
      t.predicted_survival[id] = 1.0 / h;
      w.predicted_survival[id] = h;
    }
    true_mean += c_index(fresh.cohort, t).first;
    wrong_mean += c_index(fresh.cohort, w).first;
  }
  CHECK(true_mean > wrong_mean);
}

TEST_CASE("dense baseline rendering matches the analytic survival") {
  const BaselineSpec weib = WeibullBaseline{1.5, 2.0};
  const BaselineSurvival dense = discretize_baseline(weib, 10.0, 4000);
  for (double t : {0.5, 1.0, 2.5, 7.0}) {
    CHECK(dense.survival_at(t) ==
          doctest::Approx(baseline_survival(weib, t)).epsilon(5e-3));
  }
}
