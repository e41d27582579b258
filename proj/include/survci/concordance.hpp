#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "survci/core.hpp"

namespace survci {

// Census of valid pairwise survival comparisons. A pair (i, j) is comparable
// in the direction i-outlives-j iff T~_i > T~_j and member j's event was
// observed; at most one direction qualifies per pair. K_l counts comparisons
// touching group l, so a within-group pair counts twice and sum_l K_l = 2K.
struct PairUniverse {
  std::int64_t comparable_pairs = 0;        // K
  std::vector<std::int64_t> per_group;      // K_l, aligned with group_levels
};

// P(member i outlives member j) under proportional hazards: h_j / (h_i + h_j).
double pairwise_win_probability(double h_i, double h_j);

// Harrell's C-Index over the censoring-aware pair universe. Requires distinct
// observed times and distinct predictions within every compared pair.
std::pair<double, PairUniverse> c_index(const Cohort& cohort,
                                        const PredictionModel& model);

// Expected C-Index: every comparable pair credits the win probability of the
// direction the model predicts, divided by K. Under the observed-time (M*)
// ordering this is the proportional-hazards upper bound.
double expected_c_index(const Cohort& cohort, const HazardAssignment& hazards,
                        const PredictionModel& model);

// Expected C-Index for uncensored case analysis: all members must carry an
// observed event; the denominator is m(m-1)/2.
double uncensored_expected_c_index(const Cohort& cohort,
                                   const HazardAssignment& hazards,
                                   const PredictionModel& model);

// Concordance over comparisons with at least one member in group `label`,
// against the whole population. Weighted by K_l/2K these recompose c_index.
double sub_c_index(const Cohort& cohort, const PredictionModel& model,
                   const std::string& label);

// Concordance restricted to pairs with both members in group `label`.
double within_sub_c_index(const Cohort& cohort, const PredictionModel& model,
                          const std::string& label);

double expected_sub_c_index(const Cohort& cohort, const HazardAssignment& hazards,
                            const PredictionModel& model, const std::string& label);

// (ci - 0.5) / (eci - 0.5); the share of explainable discrimination achieved.
double discrimination_ratio(double ci, double eci);

// One O(m^2) pass producing CI of the fitted model, ECI of the reference
// (M*) model, their ratio and every per-group metric.
ConcordanceReport concordance_report(const Cohort& cohort,
                                     const PredictionModel& fitted_model,
                                     const HazardAssignment& star_hazards,
                                     const PredictionModel& star_model);

}  // namespace survci
