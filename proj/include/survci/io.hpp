#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "survci/baseline.hpp"
#include "survci/core.hpp"
#include "survci/coxfit.hpp"
#include "survci/evalharness.hpp"
#include "survci/simulate.hpp"

namespace survci {

// Cohort CSV schema (header required):
//   id,time,event,group,<covariate columns...>[,origin_time]
// event is 0/1, decimal point '.', empty covariate cells mean missing. A
// covariate column with any non-numeric cell is treated as categorical and
// one-hot encoded as `name=level` indicators, first-appearance level order,
// first level dropped.
struct RawCohortFile {
  std::vector<SurvivalRecord> records;
  std::vector<std::string> covariate_names;     // after one-hot expansion
  std::vector<std::string> categorical_columns; // original names
  bool has_origin_time = false;
};

RawCohortFile read_cohort_csv(std::istream& in);
RawCohortFile read_cohort_csv_file(const std::string& path);
void write_cohort_csv(std::ostream& out, const Cohort& cohort,
                      bool with_origin_time = false);

// BaselineSurvival round-trips through `time,survival` CSV (a final row at
// the horizon pins tau when it exceeds the last knot) and through JSON.
void write_baseline_csv(std::ostream& out, const BaselineSurvival& baseline);
BaselineSurvival read_baseline_csv(std::istream& in);
nlohmann::json baseline_to_json(const BaselineSurvival& baseline);
BaselineSurvival baseline_from_json(const nlohmann::json& j);

nlohmann::json coxfit_to_json(const CoxFit& fit,
                              const std::vector<std::string>& covariate_names);

nlohmann::json truth_to_json(const TruthBundle& bundle);

nlohmann::json study_result_to_json(const StudyResult& result);
void write_summary_csv(std::ostream& out, const StudyResult& result);
// Markdown tables mirroring the overall and per-subgroup layouts; subgroup
// rows carry significance markers (currently § for the sign test, † for
// Mann-Whitney).
std::string study_tables_markdown(const StudyResult& result);

std::string sweep_csv(const std::map<double, ReplicateSummary>& sweep);
std::string sweep_markdown(const std::map<double, ReplicateSummary>& sweep);

// Config parsing for the CLI.
SimulationConfig simulation_config_from_json(const nlohmann::json& j);
struct StudyFileConfig {
  StudyConfig study;
  CoxOptions cox;
  ValidationPolicy validation;
  std::vector<double> fractions;  // sweep only
};
StudyFileConfig study_config_from_json(const nlohmann::json& j);

}  // namespace survci
