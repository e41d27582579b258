#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace survci {

// One population member: time of observation, event indicator, predictors and
// subpopulation label. origin_time (entry/transplant time) is carried through
// ingestion but enters no computation.
struct SurvivalRecord {
  std::string id;
  double observed_time = 0.0;
  bool event = false;
  Eigen::VectorXd covariates;
  std::string group;
  std::optional<double> origin_time;
};

struct Cohort {
  std::vector<SurvivalRecord> records;
  std::vector<std::string> covariate_names;
  std::vector<std::string> group_levels;
  std::string time_unit = "time";

  std::size_t size() const { return records.size(); }
  Eigen::Index covariate_dim() const {
    return static_cast<Eigen::Index>(covariate_names.size());
  }

  Eigen::VectorXd times() const;
  Eigen::MatrixXd covariate_matrix() const;  // size() x covariate_dim()
  std::size_t event_count() const;

  // Index of each record's group within group_levels.
  std::vector<int> group_index() const;
  int level_of(const std::string& label) const;  // -1 when absent
};

// Per-column [min, max] filter applied during ingestion. `column` names a
// covariate column or the time column ("time").
struct RangeFilter {
  std::string column;
  double min;
  double max;
};

struct ValidationPolicy {
  std::vector<RangeFilter> range_filters;
  std::string time_unit = "time";
};

struct ValidationReport {
  std::size_t kept = 0;
  std::size_t dropped_missing = 0;
  std::size_t dropped_nonpositive_time = 0;
  std::map<std::string, std::size_t> dropped_range;  // column -> count

  std::size_t total_dropped() const;
};

// Ingestion gate: drops records with missing (NaN) covariates, nonpositive or
// non-finite times, and range-filter violations. Duplicate ids and an empty
// filtered result are errors. Idempotent on its own output.
Cohort validate_cohort(const std::vector<SurvivalRecord>& raw_records,
                       Eigen::Index covariate_dim,
                       const std::vector<std::string>& covariate_names,
                       const ValidationPolicy& policy = {},
                       ValidationReport* report = nullptr);

enum class HazardProvenance { observed_inverted, model_fitted, true_synthetic };

// Member-specific proportional hazard rates h_i, keyed by record id.
struct HazardAssignment {
  std::unordered_map<std::string, double> rates;
  HazardProvenance provenance = HazardProvenance::model_fitted;

  double at(const std::string& id) const;
  // Rates in cohort record order; throws on missing id or nonpositive rate.
  Eigen::VectorXd aligned(const Cohort& cohort) const;
};

// Predicted survival scores; only the induced order is ever used, so any
// strictly order-equivalent score is acceptable (larger = longer survival).
struct PredictionModel {
  std::unordered_map<std::string, double> predicted_survival;

  double at(const std::string& id) const;
  Eigen::VectorXd aligned(const Cohort& cohort) const;
};

struct GroupReport {
  std::string label;
  double subci = 0.0;
  double subeci = 0.0;
  double subdr = 0.0;
  std::optional<double> within_subci;  // absent when no within-group pair exists
  std::int64_t pair_count = 0;         // K_l
};

// CI is the fitted model's concordance, ECI the hazard-inversion upper bound,
// DR their ratio above the 0.5 chance level.
struct ConcordanceReport {
  double ci = 0.0;
  double eci = 0.0;
  double dr = 0.0;
  std::int64_t pair_count = 0;  // K
  std::vector<GroupReport> per_group;
};

}  // namespace survci
