#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "survci/core.hpp"
#include "survci/coxfit.hpp"
#include "survci/stats.hpp"

namespace survci {

// Repeated-random-split study design: optional subgroup balancing and
// administrative censoring, tie perturbation, a fraction-f split into
// retrospective and prospective halves, Cox + Breslow estimation on the
// retrospective side, and concordance metrics on the side chosen by eci_on.
struct StudyConfig {
  int replicates = 30;
  double split_fraction = 0.5;
  std::optional<double> epsilon;               // default: auto_epsilon
  std::vector<std::string> balance_groups;     // empty = no balancing
  bool drop_unlisted_groups = false;
  std::optional<double> follow_up_horizon;     // administrative censoring
  std::uint64_t seed = 0;
  enum class EciSide { pro, ret };
  EciSide eci_on = EciSide::pro;
  std::string scenario = "study";              // label used in emitted tables
};

// Adds an independent Unif(0, epsilon) offset to every observed time, making
// ties almost surely distinct while preserving all original strict orderings
// whenever epsilon is below the smallest positive gap.
Cohort perturb_ties(const Cohort& cohort, double epsilon, std::uint64_t seed);

// 1e-6 times the smallest positive gap between distinct observed times.
double auto_epsilon(const Cohort& cohort);

// Follow-up truncation: observations beyond the horizon become censored at
// the horizon.
Cohort administrative_censor(const Cohort& cohort, double horizon);

// Random deletion from the listed groups down to the smallest listed group's
// size. Unlisted groups pass through unchanged unless drop_unlisted is set.
Cohort undersample_balance(const Cohort& cohort,
                           const std::vector<std::string>& labels,
                           std::uint64_t seed, bool drop_unlisted = false);

// Disjoint exhaustive random split with round(fraction * m) members on the
// retrospective side.
std::pair<Cohort, Cohort> split(const Cohort& cohort, double fraction,
                                std::uint64_t seed);

struct ReplicateOutcome {
  int replicate = 0;
  ConcordanceReport report;
  double ret_ci_mstar = 0.0;  // must be exactly 1
  bool self_check_passed = false;
  std::size_t ret_size = 0;
  std::size_t eval_size = 0;
  std::size_t clamped_min = 0;  // evaluation-side inversion clamps
  std::size_t clamped_max = 0;
  double epsilon_used = 0.0;
  CoxFit fit;
};

struct GroupSummary {
  std::string label;
  ReplicateSummary subci;
  ReplicateSummary subeci;
  ReplicateSummary subdr;
  double sign_p = 1.0;  // paired SUBCI-vs-CI sign test across replicates
  double mw_p = 1.0;    // unpaired Mann-Whitney on the two replicate samples
  bool sign_significant = false;
  bool mw_significant = false;
};

struct StudySummaries {
  ReplicateSummary ci;
  ReplicateSummary eci;
  ReplicateSummary dr;
  std::vector<GroupSummary> per_group;
};

struct StudyResult {
  std::vector<ReplicateOutcome> replicates;
  StudySummaries summaries;
  std::string scenario;
  std::string time_unit;
  std::vector<std::string> covariate_names;
};

StudyResult run_study(const Cohort& cohort, const StudyConfig& study,
                      const CoxOptions& cox_options = {}, int threads = 1);

// Standard deviation of the expected C-Index across replicates, per split
// fraction; the sd-minimizing fraction is the natural split choice.
std::map<double, ReplicateSummary> split_sweep(const Cohort& cohort,
                                               const std::vector<double>& fractions,
                                               const StudyConfig& base,
                                               const CoxOptions& cox_options = {},
                                               int threads = 1);

std::map<double, ReplicateSummary> split_sweep(const Cohort& cohort,
                                               const std::vector<double>& fractions,
                                               int replicates, std::uint64_t seed);

}  // namespace survci
