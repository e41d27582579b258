#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "survci/baseline.hpp"
#include "survci/core.hpp"

namespace survci {

struct ExponentialBaseline {
  double rate = 1.0;
};

struct WeibullBaseline {
  double shape = 1.0;
  double scale = 1.0;
};

// Piecewise-constant survival: event times are drawn on the knot set by exact
// CDF inversion. Any mass left beyond the last knot (values.back() > 0) lands
// at +infinity and must be removed by censoring.
struct StepBaselineSpec {
  std::vector<double> knots;
  std::vector<double> values;
};

using BaselineSpec = std::variant<ExponentialBaseline, WeibullBaseline, StepBaselineSpec>;

// True baseline survival at time t for hazard rate 1.
double baseline_survival(const BaselineSpec& spec, double t);

// Dense step-function rendering of the true baseline, for feeding the
// estimation-side machinery with (near) exact ground truth.
BaselineSurvival discretize_baseline(const BaselineSpec& spec, double horizon,
                                     std::size_t segments = 4096);

struct CovariateSpec {
  enum class Dist { standard_normal, bernoulli, uniform };
  std::string name;
  Dist dist = Dist::standard_normal;
  double a = 0.0;  // bernoulli p, or uniform lower bound
  double b = 1.0;  // uniform upper bound
};

struct CensoringSpec {
  enum class Kind { none, administrative, independent_exponential, both };
  Kind kind = Kind::none;
  double horizon = 0.0;  // administrative cutoff t*
  double rate = 0.0;     // exponential censoring rate
};

struct GroupRule {
  enum class Kind { single, multinomial, covariate_threshold };
  Kind kind = Kind::single;
  std::vector<std::string> labels;  // multinomial / threshold bucket labels
  std::vector<double> probs;        // multinomial weights, sum to 1
  std::string covariate;            // threshold source column
  std::vector<double> cutpoints;    // ascending; buckets = cutpoints.size()+1
};

struct SimulationConfig {
  std::size_t m = 0;
  BaselineSpec baseline = ExponentialBaseline{};
  Eigen::VectorXd beta;
  std::vector<CovariateSpec> covariates;
  CensoringSpec censoring;
  GroupRule groups;
  std::uint64_t seed = 0;
  std::string time_unit = "time";
};

// Ground-truth cohort: the member-level hazards, uncensored event times and
// censoring times behind the observed data.
struct TruthBundle {
  Cohort cohort;
  HazardAssignment true_hazards;  // provenance true_synthetic
  std::unordered_map<std::string, double> true_event_times;
  std::unordered_map<std::string, double> censor_times;  // +inf when none
};

// Samples h_i = exp(beta' z_i), draws T_i by inverse transform from
// 1 - S0(t)^{h_i}, applies censoring. Deterministic given config.seed.
TruthBundle generate_cohort(const SimulationConfig& config);

// Monte-Carlo oracle for the pairwise win probability h_j/(h_i+h_j).
double monte_carlo_win_probability(const BaselineSpec& baseline, double h_i,
                                   double h_j, std::size_t n_pairs,
                                   std::uint64_t seed);

enum class ModelRule { true_model, fitted_cox };

// Realized C-Index distribution: covariates/hazards (and, for fitted_cox, the
// model estimated on the initial draw) stay fixed while event and censoring
// times are redrawn each replicate.
std::vector<double> monte_carlo_realized_ci(const SimulationConfig& config,
                                            ModelRule model_rule,
                                            std::size_t n_reps,
                                            std::uint64_t seed);

}  // namespace survci
