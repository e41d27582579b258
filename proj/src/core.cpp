#include "survci/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace survci {

Eigen::VectorXd Cohort::times() const {
  Eigen::VectorXd t(static_cast<Eigen::Index>(records.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    t[i] = records[static_cast<std::size_t>(i)].observed_time;
  }
  return t;
}

Eigen::MatrixXd Cohort::covariate_matrix() const {
  Eigen::MatrixXd z(static_cast<Eigen::Index>(records.size()), covariate_dim());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    z.row(i) = records[static_cast<std::size_t>(i)].covariates.transpose();
  }
  return z;
}

std::size_t Cohort::event_count() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.event ? 1 : 0;
  return n;
}

std::vector<int> Cohort::group_index() const {
  std::unordered_map<std::string, int> level;
  for (std::size_t l = 0; l < group_levels.size(); ++l) {
    level[group_levels[l]] = static_cast<int>(l);
  }
  std::vector<int> idx(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = level.find(records[i].group);
    if (it == level.end()) {
      throw std::logic_error("group label '" + records[i].group +
                             "' not in group_levels");
    }
    idx[i] = it->second;
  }
  return idx;
}

int Cohort::level_of(const std::string& label) const {
  for (std::size_t l = 0; l < group_levels.size(); ++l) {
    if (group_levels[l] == label) return static_cast<int>(l);
  }
  return -1;
}

std::size_t ValidationReport::total_dropped() const {
  std::size_t n = dropped_missing + dropped_nonpositive_time;
  for (const auto& [col, c] : dropped_range) n += c;
  return n;
}

namespace {

bool passes_range(const SurvivalRecord& rec, const RangeFilter& f,
                  const std::vector<std::string>& covariate_names) {
  double value;
  if (f.column == "time") {
    value = rec.observed_time;
  } else {
    auto it = std::find(covariate_names.begin(), covariate_names.end(), f.column);
    if (it == covariate_names.end()) {
      throw std::invalid_argument("range filter references unknown column '" +
                                  f.column + "'");
    }
    value = rec.covariates[it - covariate_names.begin()];
  }
  return value >= f.min && value <= f.max;
}

}  // namespace

Cohort validate_cohort(const std::vector<SurvivalRecord>& raw_records,
                       Eigen::Index covariate_dim,
                       const std::vector<std::string>& covariate_names,
                       const ValidationPolicy& policy, ValidationReport* report) {
  if (static_cast<Eigen::Index>(covariate_names.size()) != covariate_dim) {
    throw std::invalid_argument("covariate_names length does not match covariate_dim");
  }

  std::unordered_set<std::string> seen;
  for (const auto& rec : raw_records) {
    if (!seen.insert(rec.id).second) {
      throw std::invalid_argument("duplicate id '" + rec.id + "'");
    }
  }

  ValidationReport local;
  Cohort cohort;
  cohort.covariate_names = covariate_names;
  cohort.time_unit = policy.time_unit;

  for (const auto& rec : raw_records) {
    if (rec.covariates.size() != covariate_dim) {
      throw std::invalid_argument("record '" + rec.id +
                                  "' has wrong covariate length");
    }
    if (rec.covariates.hasNaN()) {
      ++local.dropped_missing;
      continue;
    }
    if (!(rec.observed_time > 0.0) || !std::isfinite(rec.observed_time)) {
      ++local.dropped_nonpositive_time;
      continue;
    }
    bool dropped = false;
    for (const auto& f : policy.range_filters) {
      if (!passes_range(rec, f, covariate_names)) {
        ++local.dropped_range[f.column];
        dropped = true;
        break;
      }
    }
    if (dropped) continue;

    cohort.records.push_back(rec);
    if (cohort.level_of(rec.group) < 0) cohort.group_levels.push_back(rec.group);
  }

  local.kept = cohort.records.size();
  if (report != nullptr) *report = local;
  if (cohort.records.empty()) throw std::runtime_error("empty cohort");
  return cohort;
}

double HazardAssignment::at(const std::string& id) const {
  auto it = rates.find(id);
  if (it == rates.end()) throw std::invalid_argument("missing hazard for id '" + id + "'");
  return it->second;
}

Eigen::VectorXd HazardAssignment::aligned(const Cohort& cohort) const {
  Eigen::VectorXd h(static_cast<Eigen::Index>(cohort.size()));
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double v = at(cohort.records[static_cast<std::size_t>(i)].id);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("hazard rate must be positive and finite");
    }
    h[i] = v;
  }
  return h;
}

double PredictionModel::at(const std::string& id) const {
  auto it = predicted_survival.find(id);
  if (it == predicted_survival.end()) {
    throw std::invalid_argument("missing prediction for id '" + id + "'");
  }
  return it->second;
}

Eigen::VectorXd PredictionModel::aligned(const Cohort& cohort) const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(cohort.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    p[i] = at(cohort.records[static_cast<std::size_t>(i)].id);
  }
  return p;
}

}  // namespace survci
