#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "survci/evalharness.hpp"
#include "survci/simulate.hpp"
#include "test_util.hpp"

using namespace survci;
using testutil::make_cohort;

namespace {

SimulationConfig study_cohort_config(std::size_t m, std::uint64_t seed,
                                     double beta = 0.8) {
  SimulationConfig config;
  config.m = m;
  config.baseline = ExponentialBaseline{1.0};
  config.beta = Eigen::VectorXd::Constant(1, beta);
  config.covariates = {{"z", CovariateSpec::Dist::standard_normal, 0, 1}};
  config.groups.kind = GroupRule::Kind::multinomial;
  config.groups.labels = {"a", "b"};
  config.groups.probs = {0.5, 0.5};
  config.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("perturb_ties separates ties and preserves strict orderings") {
  const Cohort tied = make_cohort({2, 2, 2}, {1, 1, 1});
  const Cohort fixed = perturb_ties(tied, 0.1, 4);
  std::set<double> distinct;
  for (const auto& rec : fixed.records) {
    distinct.insert(rec.observed_time);
    CHECK(rec.observed_time >= 2.0);
    CHECK(rec.observed_time < 2.1);
  }
  CHECK(distinct.size() == 3);

  const Cohort spread = make_cohort({1, 2, 4}, {1, 1, 1});
  const double eps = auto_epsilon(spread);
  CHECK(eps == doctest::Approx(1e-6).epsilon(1e-9));
  const Cohort nudged = perturb_ties(spread, eps, 9);
  CHECK(nudged.records[0].observed_time < nudged.records[1].observed_time);
  CHECK(nudged.records[1].observed_time < nudged.records[2].observed_time);

  const Cohort again = perturb_ties(tied, 0.1, 4);
  for (std::size_t i = 0; i < tied.size(); ++i) {
    CHECK(again.records[i].observed_time == fixed.records[i].observed_time);
  }
  CHECK_THROWS_AS(perturb_ties(tied, 0.0, 1), std::invalid_argument);
}

TEST_CASE("auto_epsilon falls back when all times coincide") {
  const Cohort all_same = make_cohort({3, 3, 3}, {1, 1, 1});
  CHECK(auto_epsilon(all_same) == doctest::Approx(3e-6));
}

TEST_CASE("administrative censoring truncates follow-up") {
  const Cohort cohort = make_cohort({12, 8, 10.5}, {1, 0, 1});
  const Cohort censored = administrative_censor(cohort, 10.0);
  CHECK(censored.records[0].observed_time == 10.0);
  CHECK_FALSE(censored.records[0].event);
  CHECK(censored.records[1].observed_time == 8.0);
  CHECK_FALSE(censored.records[1].event);
  CHECK(censored.records[2].observed_time == 10.0);
  CHECK_FALSE(censored.records[2].event);

  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Cohort random = testutil::random_cohort(50 + trial, 40);
    const double horizon = rng.uniform(0.2, 3.0);
    const Cohort after = administrative_censor(random, horizon);
    CHECK(after.event_count() <= random.event_count());
  }
}

TEST_CASE("undersampling balances listed groups") {
  std::vector<double> times;
  std::vector<int> events;
  std::vector<std::string> groups;
  Rng rng(8);
  auto add = [&](const std::string& label, int n) {
    for (int i = 0; i < n; ++i) {
      times.push_back(rng.uniform(0.1, 5.0));
      events.push_back(1);
      groups.push_back(label);
    }
  };
  add("x", 5);
  add("y", 3);
  add("z", 4);
  const Cohort cohort = make_cohort(times, events, groups);
  const Cohort balanced = undersample_balance(cohort, {"x", "y", "z"}, 3);
  std::map<std::string, int> sizes;
  for (const auto& rec : balanced.records) ++sizes[rec.group];
  CHECK(sizes["x"] == 3);
  CHECK(sizes["y"] == 3);
  CHECK(sizes["z"] == 3);

  const Cohort same = undersample_balance(balanced, {"x", "y", "z"}, 5);
  CHECK(same.size() == balanced.size());

  CHECK_THROWS_AS(undersample_balance(cohort, {"missing"}, 1), std::runtime_error);
  CHECK_THROWS_AS(undersample_balance(cohort, {}, 1), std::invalid_argument);
}

TEST_CASE("undersampling matches the case-study group pattern") {
  std::vector<double> times;
  std::vector<int> events;
  std::vector<std::string> groups;
  Rng rng(14);
  const std::vector<std::pair<std::string, int>> pattern{
      {"Asian", 247}, {"Black", 1568}, {"Hispanic", 716}, {"White", 2659},
      {"Other", 154}};
  for (const auto& [label, n] : pattern) {
    for (int i = 0; i < n; ++i) {
      times.push_back(rng.uniform(0.01, 20.0));
      events.push_back(rng.bernoulli(0.5) ? 1 : 0);
      groups.push_back(label);
    }
  }
  const Cohort cohort = make_cohort(times, events, groups);
  const Cohort balanced = undersample_balance(
      cohort, {"Asian", "Black", "Hispanic", "White"}, 77);
  std::map<std::string, int> sizes;
  for (const auto& rec : balanced.records) ++sizes[rec.group];
  CHECK(sizes["Asian"] == 247);
  CHECK(sizes["Black"] == 247);
  CHECK(sizes["Hispanic"] == 247);
  CHECK(sizes["White"] == 247);
  CHECK(sizes["Other"] == 154);  // unlisted group passes through

  const Cohort dropped = undersample_balance(
      cohort, {"Asian", "Black", "Hispanic", "White"}, 77, true);
  std::map<std::string, int> sizes2;
  for (const auto& rec : dropped.records) ++sizes2[rec.group];
  CHECK(sizes2.count("Other") == 0);
  CHECK(dropped.size() == 4 * 247);
}

TEST_CASE("split is disjoint, exhaustive and deterministic") {
  const Cohort cohort = testutil::random_cohort(123, 100, 2, 0.2);
  auto [ret, pro] = split(cohort, 0.5, 11);
  CHECK(ret.size() == 50);
  CHECK(pro.size() == 50);
  std::set<std::string> ids;
  for (const auto& rec : ret.records) ids.insert(rec.id);
  for (const auto& rec : pro.records) ids.insert(rec.id);
  CHECK(ids.size() == 100);

  auto [ret2, pro2] = split(cohort, 0.5, 11);
  for (std::size_t i = 0; i < ret.size(); ++i) {
    CHECK(ret.records[i].id == ret2.records[i].id);
  }
  auto [ret3, pro3] = split(cohort, 0.3, 11);
  CHECK(ret3.size() == 30);

  CHECK_THROWS_AS(split(cohort, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(cohort, 1.0, 1), std::invalid_argument);
  const Cohort tiny = make_cohort({1, 2}, {1, 1});
  CHECK_THROWS_AS(split(tiny, 0.1, 1), std::runtime_error);
}

TEST_CASE("run_study self-checks, identities and determinism") {
  const TruthBundle truth = generate_cohort(study_cohort_config(500, 21));
  StudyConfig study;
  study.replicates = 8;
  study.seed = 3;
  study.follow_up_horizon = 1.5;
  const StudyResult result = run_study(truth.cohort, study);

  REQUIRE(result.replicates.size() == 8);
  for (const auto& rep : result.replicates) {
    CHECK(rep.self_check_passed);
    CHECK(rep.ret_ci_mstar == 1.0);
    CHECK(rep.fit.converged);
    CHECK(rep.ret_size == 250);
    CHECK(rep.eval_size == 250);
    // emitted report satisfies the weighted-sum identity and DR definition
    double weighted = 0.0;
    for (const auto& g : rep.report.per_group) {
      weighted += static_cast<double>(g.pair_count) /
                  (2.0 * static_cast<double>(rep.report.pair_count)) * g.subci;
    }
    CHECK(weighted == doctest::Approx(rep.report.ci).epsilon(1e-12));
    CHECK(rep.report.dr ==
          doctest::Approx((rep.report.ci - 0.5) / (rep.report.eci - 0.5))
              .epsilon(1e-12));
  }

  const StudyResult again = run_study(truth.cohort, study);
  for (std::size_t r = 0; r < result.replicates.size(); ++r) {
    CHECK(result.replicates[r].report.ci == again.replicates[r].report.ci);
    CHECK(result.replicates[r].report.eci == again.replicates[r].report.eci);
  }
}

TEST_CASE("run_study is invariant to the thread count") {
  const TruthBundle truth = generate_cohort(study_cohort_config(400, 22));
  StudyConfig study;
  study.replicates = 6;
  study.seed = 5;
  const StudyResult one = run_study(truth.cohort, study, {}, 1);
  const StudyResult four = run_study(truth.cohort, study, {}, 4);
  for (std::size_t r = 0; r < one.replicates.size(); ++r) {
    CHECK(one.replicates[r].report.ci == four.replicates[r].report.ci);
    CHECK(one.replicates[r].report.eci == four.replicates[r].report.eci);
    CHECK(one.replicates[r].report.dr == four.replicates[r].report.dr);
  }
}

TEST_CASE("null signal keeps the fitted c-index near one half") {
  const TruthBundle truth = generate_cohort(study_cohort_config(800, 23, 0.0));
  StudyConfig study;
  study.replicates = 10;
  study.seed = 7;
  const StudyResult result = run_study(truth.cohort, study);
  CHECK(result.summaries.ci.lo <= 0.5 + 0.02);
  CHECK(result.summaries.ci.hi >= 0.5 - 0.02);
}

TEST_CASE("strong signal keeps the bound above the fitted c-index everywhere") {
  const TruthBundle truth = generate_cohort(study_cohort_config(600, 24, 1.2));
  StudyConfig study;
  study.replicates = 6;
  study.seed = 9;
  const StudyResult result = run_study(truth.cohort, study);
  for (const auto& rep : result.replicates) {
    CHECK(rep.report.eci > rep.report.ci);
  }
  CHECK(result.summaries.eci.mean > result.summaries.ci.mean);
}

TEST_CASE("single replicate collapses the summary interval") {
  const TruthBundle truth = generate_cohort(study_cohort_config(300, 25));
  StudyConfig study;
  study.replicates = 1;
  study.seed = 13;
  const StudyResult result = run_study(truth.cohort, study);
  CHECK(result.summaries.ci.sd == 0.0);
  CHECK(result.summaries.ci.lo == result.summaries.ci.mean);
  CHECK(result.summaries.ci.hi == result.summaries.ci.mean);
}

TEST_CASE("balancing and eci_on=ret run through the pipeline") {
  SimulationConfig config = study_cohort_config(600, 26);
  config.groups.probs = {0.25, 0.75};
  const TruthBundle truth = generate_cohort(config);
  StudyConfig study;
  study.replicates = 3;
  study.seed = 15;
  study.balance_groups = {"a", "b"};
  study.eci_on = StudyConfig::EciSide::ret;
  const StudyResult result = run_study(truth.cohort, study);
  for (const auto& rep : result.replicates) {
    CHECK(rep.self_check_passed);
    CHECK(rep.eval_size == rep.ret_size);
  }
}

TEST_CASE("run_study attaches the replicate index to failures") {
  const Cohort no_events = make_cohort({1, 2, 3, 4}, {0, 0, 0, 0});
  StudyConfig study;
  study.replicates = 2;
  try {
    run_study(no_events, study);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("replicate") != std::string::npos);
  }
}

TEST_CASE("split_sweep reports one summary per fraction") {
  const TruthBundle truth = generate_cohort(study_cohort_config(400, 27));
  const auto sweep = split_sweep(truth.cohort, {0.4}, 4, 3);
  REQUIRE(sweep.size() == 1);
  CHECK(sweep.begin()->first == 0.4);
  CHECK(sweep.begin()->second.values.size() == 4);

  const auto both = split_sweep(truth.cohort, {0.3, 0.6}, 4, 3);
  REQUIRE(both.size() == 2);
  const auto again = split_sweep(truth.cohort, {0.3, 0.6}, 4, 3);
  CHECK(both.at(0.3).sd == again.at(0.3).sd);
  CHECK(both.at(0.6).mean == again.at(0.6).mean);

  CHECK_THROWS_AS(split_sweep(truth.cohort, {0.3, 0.3}, 4, 3), std::invalid_argument);
  CHECK_THROWS_AS(split_sweep(truth.cohort, {}, 4, 3), std::invalid_argument);
}
