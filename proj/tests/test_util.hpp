#pragma once

// Shared cohort builders and independently coded reference implementations
// used as oracles in the unit and acceptance suites. The oracles loop over
// every ordered pair and apply the comparability rule directly, unlike the
// production sorted scan.

#include <cstdint>
#include <string>
#include <vector>

#include "survci/core.hpp"
#include "survci/rng.hpp"

namespace testutil {

inline survci::Cohort make_cohort(const std::vector<double>& times,
                                  const std::vector<int>& events,
                                  const std::vector<std::string>& groups = {},
                                  const std::vector<std::vector<double>>& covariates = {},
                                  const std::vector<std::string>& covariate_names = {}) {
  survci::Cohort cohort;
  cohort.covariate_names = covariate_names;
  for (std::size_t i = 0; i < times.size(); ++i) {
    survci::SurvivalRecord rec;
    rec.id = "r" + std::to_string(i + 1);
    rec.observed_time = times[i];
    rec.event = events[i] != 0;
    rec.group = groups.empty() ? "all" : groups[i];
    if (!covariates.empty()) {
      rec.covariates = Eigen::Map<const Eigen::VectorXd>(
          covariates[i].data(), static_cast<Eigen::Index>(covariates[i].size()));
    }
    cohort.records.push_back(std::move(rec));
  }
  for (const auto& rec : cohort.records) {
    bool seen = false;
    for (const auto& l : cohort.group_levels) seen = seen || l == rec.group;
    if (!seen) cohort.group_levels.push_back(rec.group);
  }
  return cohort;
}

inline survci::PredictionModel model_from_scores(const survci::Cohort& cohort,
                                                 const std::vector<double>& scores) {
  survci::PredictionModel model;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    model.predicted_survival[cohort.records[i].id] = scores[i];
  }
  return model;
}

inline survci::HazardAssignment hazards_from(const survci::Cohort& cohort,
                                             const std::vector<double>& rates) {
  survci::HazardAssignment h;
  h.provenance = survci::HazardProvenance::true_synthetic;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    h.rates[cohort.records[i].id] = rates[i];
  }
  return h;
}

// --- reference implementations -------------------------------------------

inline bool comparable(const survci::Cohort& c, std::size_t i, std::size_t j) {
  return c.records[j].event &&
         c.records[i].observed_time > c.records[j].observed_time;
}

inline std::int64_t oracle_pair_count(const survci::Cohort& c) {
  std::int64_t k = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i != j && comparable(c, i, j)) ++k;
    }
  }
  return k;
}

inline double oracle_ci(const survci::Cohort& c, const std::vector<double>& pred) {
  std::int64_t k = 0, conc = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i == j || !comparable(c, i, j)) continue;
      ++k;
      conc += pred[i] > pred[j] ? 1 : 0;
    }
  }
  return static_cast<double>(conc) / static_cast<double>(k);
}

inline double oracle_eci(const survci::Cohort& c, const std::vector<double>& h,
                         const std::vector<double>& pred) {
  std::int64_t k = 0;
  double credit = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i == j || !comparable(c, i, j)) continue;
      ++k;
      credit += pred[i] > pred[j] ? h[j] / (h[i] + h[j]) : h[i] / (h[i] + h[j]);
    }
  }
  return credit / static_cast<double>(k);
}

inline double oracle_subci(const survci::Cohort& c, const std::vector<double>& pred,
                           const std::string& label) {
  std::int64_t k = 0, conc = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i == j || !comparable(c, i, j)) continue;
      const int touches = (c.records[i].group == label ? 1 : 0) +
                          (c.records[j].group == label ? 1 : 0);
      k += touches;
      conc += pred[i] > pred[j] ? touches : 0;
    }
  }
  return static_cast<double>(conc) / static_cast<double>(k);
}

inline double oracle_sub_eci(const survci::Cohort& c, const std::vector<double>& h,
                             const std::vector<double>& pred, const std::string& label) {
  std::int64_t k = 0;
  double credit = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i == j || !comparable(c, i, j)) continue;
      const int touches = (c.records[i].group == label ? 1 : 0) +
                          (c.records[j].group == label ? 1 : 0);
      if (touches == 0) continue;
      k += touches;
      credit += touches * (pred[i] > pred[j] ? h[j] / (h[i] + h[j])
                                             : h[i] / (h[i] + h[j]));
    }
  }
  return credit / static_cast<double>(k);
}

inline double oracle_within_subci(const survci::Cohort& c,
                                  const std::vector<double>& pred,
                                  const std::string& label) {
  std::int64_t k = 0, conc = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i == j || !comparable(c, i, j)) continue;
      if (c.records[i].group != label || c.records[j].group != label) continue;
      ++k;
      conc += pred[i] > pred[j] ? 1 : 0;
    }
  }
  return static_cast<double>(conc) / static_cast<double>(k);
}

// Random cohort with distinct times, mixed censoring and a few groups.
inline survci::Cohort random_cohort(std::uint64_t seed, std::size_t m,
                                    std::size_t n_groups = 3,
                                    double censor_prob = 0.3) {
  survci::Rng rng(seed);
  std::vector<double> times(m);
  std::vector<int> events(m);
  std::vector<std::string> groups(m);
  for (std::size_t i = 0; i < m; ++i) {
    times[i] = rng.exponential(1.0) + 1e-9;
    events[i] = rng.bernoulli(censor_prob) ? 0 : 1;
    groups[i] = std::string("g") + std::to_string(rng.below(n_groups));
  }
  if (m > 0) events[0] = 1;  // at least one event
  return make_cohort(times, events, groups);
}

}  // namespace testutil
