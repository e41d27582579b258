#include "survci/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace survci {

namespace {

using nlohmann::json;

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

double parse_double(const std::string& cell, std::size_t row, const std::string& what) {
  std::size_t pos = 0;
  double value;
  try {
    value = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("row " + std::to_string(row) + ": bad " + what +
                             " value '" + cell + "'");
  }
  if (pos != cell.size()) {
    throw std::invalid_argument("row " + std::to_string(row) + ": bad " + what +
                             " value '" + cell + "'");
  }
  return value;
}

// Shortest representation that parses back to the same double.
std::string format_full(double v) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, result.ptr);
}

std::string format_round3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

json summary_to_json(const ReplicateSummary& s) {
  return json{{"mean", s.mean}, {"sd", s.sd},   {"lo", s.lo},
              {"hi", s.hi},     {"level", s.level}, {"values", s.values}};
}

}  // namespace

namespace {

bool parses_as_double(const std::string& cell) {
  std::size_t pos = 0;
  try {
    (void)std::stod(cell, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == cell.size();
}

}  // namespace

RawCohortFile read_cohort_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty CSV input");
  const auto header = split_line(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "time" ||
      header[2] != "event" || header[3] != "group") {
    throw std::invalid_argument("CSV header must start with id,time,event,group");
  }
  RawCohortFile file;
  std::size_t n_cov = header.size() - 4;
  if (n_cov > 0 && header.back() == "origin_time") {
    file.has_origin_time = true;
    --n_cov;
  }

  // Buffer the rows: covariate columns are typed by inspection before any
  // value lands in a record.
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw std::invalid_argument("row " + std::to_string(row) +
                               ": expected " + std::to_string(header.size()) +
                               " cells, got " + std::to_string(cells.size()));
    }
    rows.emplace_back(row, std::move(cells));
  }

  std::vector<bool> numeric(n_cov, true);
  for (std::size_t j = 0; j < n_cov; ++j) {
    for (const auto& [rownum, cells] : rows) {
      const std::string& cell = cells[4 + j];
      if (!cell.empty() && !parses_as_double(cell)) {
        numeric[j] = false;
        break;
      }
    }
  }

  // Categorical levels in first-appearance order; the first level is the
  // reference and gets no indicator column.
  std::vector<std::vector<std::string>> levels(n_cov);
  for (std::size_t j = 0; j < n_cov; ++j) {
    if (numeric[j]) continue;
    file.categorical_columns.push_back(header[4 + j]);
    for (const auto& [rownum, cells] : rows) {
      const std::string& cell = cells[4 + j];
      if (cell.empty()) continue;
      if (std::find(levels[j].begin(), levels[j].end(), cell) == levels[j].end()) {
        levels[j].push_back(cell);
      }
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> expansion;  // column, level
  for (std::size_t j = 0; j < n_cov; ++j) {
    if (numeric[j]) {
      file.covariate_names.push_back(header[4 + j]);
      expansion.emplace_back(j, 0);
    } else {
      for (std::size_t l = 1; l < levels[j].size(); ++l) {
        file.covariate_names.push_back(header[4 + j] + "=" + levels[j][l]);
        expansion.emplace_back(j, l);
      }
    }
  }

  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [rownum, cells] : rows) {
    SurvivalRecord rec;
    rec.id = cells[0];
    if (rec.id.empty()) throw std::invalid_argument("row " + std::to_string(rownum) + ": empty id");
    rec.observed_time = parse_double(cells[1], rownum, "time");
    if (cells[2] == "0") {
      rec.event = false;
    } else if (cells[2] == "1") {
      rec.event = true;
    } else {
      throw std::invalid_argument("row " + std::to_string(rownum) +
                               ": event must be 0 or 1, got '" + cells[2] + "'");
    }
    rec.group = cells[3];
    rec.covariates.resize(static_cast<Eigen::Index>(expansion.size()));
    for (std::size_t e = 0; e < expansion.size(); ++e) {
      const auto [j, l] = expansion[e];
      const std::string& cell = cells[4 + j];
      double value;
      if (cell.empty()) {
        value = kNaN;
      } else if (numeric[j]) {
        value = parse_double(cell, rownum, header[4 + j]);
      } else {
        value = cell == levels[j][l] ? 1.0 : 0.0;
      }
      rec.covariates[static_cast<Eigen::Index>(e)] = value;
    }
    if (file.has_origin_time) {
      const std::string& cell = cells.back();
      if (!cell.empty()) rec.origin_time = parse_double(cell, rownum, "origin_time");
    }
    file.records.push_back(std::move(rec));
  }
  return file;
}

RawCohortFile read_cohort_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_cohort_csv(in);
}

void write_cohort_csv(std::ostream& out, const Cohort& cohort, bool with_origin_time) {
  out << "id,time,event,group";
  for (const auto& name : cohort.covariate_names) out << ',' << name;
  if (with_origin_time) out << ",origin_time";
  out << '\n';
  for (const auto& rec : cohort.records) {
    out << rec.id << ',' << format_full(rec.observed_time) << ','
        << (rec.event ? 1 : 0) << ',' << rec.group;
    for (Eigen::Index j = 0; j < rec.covariates.size(); ++j) {
      out << ',' << format_full(rec.covariates[j]);
    }
    if (with_origin_time) {
      out << ',';
      if (rec.origin_time) out << format_full(*rec.origin_time);
    }
    out << '\n';
  }
}

void write_baseline_csv(std::ostream& out, const BaselineSurvival& baseline) {
  out << "time,survival\n";
  const auto& kt = baseline.knot_times();
  const auto& sv = baseline.values();
  for (Eigen::Index j = 0; j < kt.size(); ++j) {
    out << format_full(kt[j]) << ',' << format_full(sv[j]) << '\n';
  }
  if (baseline.horizon() > kt[kt.size() - 1]) {
    out << format_full(baseline.horizon()) << ','
        << format_full(baseline.tail_value()) << '\n';
  }
}

BaselineSurvival read_baseline_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || split_line(line) != std::vector<std::string>{"time", "survival"}) {
    throw std::invalid_argument("baseline CSV header must be time,survival");
  }
  std::vector<double> times, values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != 2) {
      throw std::invalid_argument("row " + std::to_string(row) + ": expected 2 cells");
    }
    times.push_back(parse_double(cells[0], row, "time"));
    values.push_back(parse_double(cells[1], row, "survival"));
  }
  if (times.empty()) throw std::invalid_argument("baseline CSV has no rows");
  // A trailing duplicate-survival row encodes the horizon.
  double horizon = times.back();
  double tail = values.back();
  std::size_t k = times.size();
  if (k >= 2 && values[k - 1] == values[k - 2]) --k;
  Eigen::ArrayXd kt = Eigen::Map<const Eigen::ArrayXd>(times.data(), static_cast<Eigen::Index>(k));
  Eigen::ArrayXd sv = Eigen::Map<const Eigen::ArrayXd>(values.data(), static_cast<Eigen::Index>(k));
  return BaselineSurvival::make(kt, sv, horizon, tail);
}

json baseline_to_json(const BaselineSurvival& baseline) {
  return json{{"knot_times", std::vector<double>(baseline.knot_times().begin(),
                                                 baseline.knot_times().end())},
              {"values", std::vector<double>(baseline.values().begin(),
                                             baseline.values().end())},
              {"horizon", baseline.horizon()},
              {"tail_value", baseline.tail_value()}};
}

BaselineSurvival baseline_from_json(const json& j) {
  const auto times = j.at("knot_times").get<std::vector<double>>();
  const auto values = j.at("values").get<std::vector<double>>();
  Eigen::ArrayXd kt = Eigen::Map<const Eigen::ArrayXd>(times.data(),
                                                       static_cast<Eigen::Index>(times.size()));
  Eigen::ArrayXd sv = Eigen::Map<const Eigen::ArrayXd>(values.data(),
                                                       static_cast<Eigen::Index>(values.size()));
  return BaselineSurvival::make(kt, sv, j.at("horizon").get<double>(),
                                j.at("tail_value").get<double>());
}

json coxfit_to_json(const CoxFit& fit, const std::vector<std::string>& covariate_names) {
  return json{{"coefficients", std::vector<double>(fit.coefficients.begin(),
                                                   fit.coefficients.end())},
              {"standard_errors", std::vector<double>(fit.standard_errors.begin(),
                                                      fit.standard_errors.end())},
              {"covariates", covariate_names},
              {"log_likelihood", fit.log_likelihood},
              {"iterations", fit.iterations},
              {"converged", fit.converged},
              {"tie_method", fit.tie_method == TieMethod::breslow ? "breslow" : "efron"}};
}

json truth_to_json(const TruthBundle& bundle) {
  json hazards = json::object();
  json event_times = json::object();
  json censor_times = json::object();
  for (const auto& rec : bundle.cohort.records) {
    hazards[rec.id] = bundle.true_hazards.rates.at(rec.id);
    event_times[rec.id] = bundle.true_event_times.at(rec.id);
    const double d = bundle.censor_times.at(rec.id);
    censor_times[rec.id] = std::isfinite(d) ? json(d) : json();
  }
  return json{{"hazards", hazards},
              {"event_times", event_times},
              {"censor_times", censor_times},
              {"provenance", "true_synthetic"}};
}

json study_result_to_json(const StudyResult& result) {
  json replicates = json::array();
  for (const auto& o : result.replicates) {
    json groups = json::array();
    for (const auto& g : o.report.per_group) {
      json gj{{"label", g.label},     {"subci", g.subci},
              {"subeci", g.subeci},   {"subdr", g.subdr},
              {"pair_count", g.pair_count}};
      gj["within_subci"] = g.within_subci ? json(*g.within_subci) : json();
      groups.push_back(std::move(gj));
    }
    replicates.push_back(json{
        {"replicate", o.replicate},
        {"ci", o.report.ci},
        {"eci", o.report.eci},
        {"dr", o.report.dr},
        {"pair_count", o.report.pair_count},
        {"per_group", groups},
        {"ret_ci_mstar", o.ret_ci_mstar},
        {"self_check_passed", o.self_check_passed},
        {"ret_size", o.ret_size},
        {"eval_size", o.eval_size},
        {"clamped_min", o.clamped_min},
        {"clamped_max", o.clamped_max},
        {"epsilon", o.epsilon_used},
        {"cox", coxfit_to_json(o.fit, result.covariate_names)},
    });
  }

  json groups = json::array();
  for (const auto& g : result.summaries.per_group) {
    groups.push_back(json{{"label", g.label},
                          {"subci", summary_to_json(g.subci)},
                          {"subeci", summary_to_json(g.subeci)},
                          {"subdr", summary_to_json(g.subdr)},
                          {"sign_p", g.sign_p},
                          {"mann_whitney_p", g.mw_p},
                          {"sign_significant", g.sign_significant},
                          {"mann_whitney_significant", g.mw_significant}});
  }
  return json{{"scenario", result.scenario},
              {"time_unit", result.time_unit},
              {"hazard_convention",
               "h* inverted from observed times on the evaluation side"},
              {"replicates", replicates},
              {"summaries", json{{"ci", summary_to_json(result.summaries.ci)},
                                 {"eci", summary_to_json(result.summaries.eci)},
                                 {"dr", summary_to_json(result.summaries.dr)},
                                 {"per_group", groups}}}};
}

void write_summary_csv(std::ostream& out, const StudyResult& result) {
  out << "metric,group,mean,sd,lo,hi\n";
  const auto row = [&](const std::string& metric, const std::string& group,
                       const ReplicateSummary& s) {
    out << metric << ',' << group << ',' << format_round3(s.mean) << ','
        << format_round3(s.sd) << ',' << format_round3(s.lo) << ','
        << format_round3(s.hi) << '\n';
  };
  row("ci", "", result.summaries.ci);
  row("eci", "", result.summaries.eci);
  row("dr", "", result.summaries.dr);
  for (const auto& g : result.summaries.per_group) {
    row("subci", g.label, g.subci);
    row("subeci", g.label, g.subeci);
    row("subdr", g.label, g.subdr);
  }
}

namespace {

std::string ci_cell(const ReplicateSummary& s) {
  return format_round3(s.mean) + " (" + format_round3(s.lo) + "," +
         format_round3(s.hi) + ")";
}

std::string percent_cell(double ratio) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * ratio << "%";
  return os.str();
}

}  // namespace

std::string study_tables_markdown(const StudyResult& result) {
  std::ostringstream os;
  os << "| Scenario | CI(M^) | E[CI(M*)] | DR |\n";
  os << "|---|---|---|---|\n";
  os << "| " << result.scenario << " | " << ci_cell(result.summaries.ci)
     << " | " << ci_cell(result.summaries.eci) << " | "
     << percent_cell(result.summaries.dr.mean) << " |\n";
  if (!result.summaries.per_group.empty()) {
    os << "\n| Scenario | Group | SUBCI(l,M^) | E[SUBCI(l,M*)] | SUBDR |\n";
    os << "|---|---|---|---|---|\n";
    for (const auto& g : result.summaries.per_group) {
      std::string markers;
      if (g.sign_significant) markers += "§";
      if (g.mw_significant) markers += "†";
      os << "| " << result.scenario << " | " << g.label << " | "
         << ci_cell(g.subci) << markers << " | " << ci_cell(g.subeci) << " | "
         << percent_cell(g.subdr.mean) << " |\n";
    }
  }
  return os.str();
}

std::string sweep_csv(const std::map<double, ReplicateSummary>& sweep) {
  double best_fraction = 0.0;
  double best_sd = std::numeric_limits<double>::infinity();
  for (const auto& [f, s] : sweep) {
    if (s.sd < best_sd) {
      best_sd = s.sd;
      best_fraction = f;
    }
  }
  std::ostringstream os;
  os << "fraction,eci_mean,eci_sd,min_sd\n";
  for (const auto& [f, s] : sweep) {
    os << format_full(f) << ',' << format_full(s.mean) << ','
       << format_full(s.sd) << ',' << (f == best_fraction ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string sweep_markdown(const std::map<double, ReplicateSummary>& sweep) {
  double best_fraction = 0.0;
  double best_sd = std::numeric_limits<double>::infinity();
  for (const auto& [f, s] : sweep) {
    if (s.sd < best_sd) {
      best_sd = s.sd;
      best_fraction = f;
    }
  }
  std::ostringstream os;
  os << "| Fraction | ECI mean | ECI sd |\n|---|---|---|\n";
  for (const auto& [f, s] : sweep) {
    os << "| " << format_round3(f) << (f == best_fraction ? " (min sd)" : "")
       << " | " << format_round3(s.mean) << " | "
       << std::scientific << std::setprecision(3) << s.sd << " |\n";
    os << std::defaultfloat;
  }
  return os.str();
}

SimulationConfig simulation_config_from_json(const json& j) {
  SimulationConfig config;
  config.m = j.at("m").get<std::size_t>();
  config.seed = j.value("seed", std::uint64_t{0});
  config.time_unit = j.value("time_unit", std::string("time"));

  const json& b = j.at("baseline");
  const std::string type = b.at("type").get<std::string>();
  if (type == "exponential") {
    config.baseline = ExponentialBaseline{b.at("rate").get<double>()};
  } else if (type == "weibull") {
    config.baseline = WeibullBaseline{b.at("shape").get<double>(),
                                      b.at("scale").get<double>()};
  } else if (type == "step") {
    config.baseline = StepBaselineSpec{b.at("knots").get<std::vector<double>>(),
                                       b.at("values").get<std::vector<double>>()};
  } else {
    throw std::invalid_argument("unknown baseline type '" + type + "'");
  }

  const auto beta = j.at("beta").get<std::vector<double>>();
  config.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(),
                                                  static_cast<Eigen::Index>(beta.size()));
  for (const json& cj : j.at("covariates")) {
    CovariateSpec cov;
    cov.name = cj.at("name").get<std::string>();
    const std::string dist = cj.value("dist", std::string("normal"));
    if (dist == "normal") {
      cov.dist = CovariateSpec::Dist::standard_normal;
    } else if (dist == "bernoulli") {
      cov.dist = CovariateSpec::Dist::bernoulli;
      cov.a = cj.at("p").get<double>();
    } else if (dist == "uniform") {
      cov.dist = CovariateSpec::Dist::uniform;
      cov.a = cj.at("a").get<double>();
      cov.b = cj.at("b").get<double>();
    } else {
      throw std::invalid_argument("unknown covariate dist '" + dist + "'");
    }
    config.covariates.push_back(std::move(cov));
  }

  if (j.contains("censoring")) {
    const json& c = j.at("censoring");
    const std::string kind = c.at("type").get<std::string>();
    if (kind == "none") {
      config.censoring.kind = CensoringSpec::Kind::none;
    } else if (kind == "administrative") {
      config.censoring.kind = CensoringSpec::Kind::administrative;
      config.censoring.horizon = c.at("horizon").get<double>();
    } else if (kind == "independent_exponential") {
      config.censoring.kind = CensoringSpec::Kind::independent_exponential;
      config.censoring.rate = c.at("rate").get<double>();
    } else if (kind == "both") {
      config.censoring.kind = CensoringSpec::Kind::both;
      config.censoring.horizon = c.at("horizon").get<double>();
      config.censoring.rate = c.at("rate").get<double>();
    } else {
      throw std::invalid_argument("unknown censoring type '" + kind + "'");
    }
  }

  if (j.contains("groups")) {
    const json& g = j.at("groups");
    const std::string kind = g.at("type").get<std::string>();
    if (kind == "multinomial") {
      config.groups.kind = GroupRule::Kind::multinomial;
      config.groups.labels = g.at("labels").get<std::vector<std::string>>();
      config.groups.probs = g.at("probs").get<std::vector<double>>();
    } else if (kind == "threshold") {
      config.groups.kind = GroupRule::Kind::covariate_threshold;
      config.groups.labels = g.at("labels").get<std::vector<std::string>>();
      config.groups.covariate = g.at("covariate").get<std::string>();
      config.groups.cutpoints = g.at("cutpoints").get<std::vector<double>>();
    } else if (kind == "single") {
      config.groups.kind = GroupRule::Kind::single;
    } else {
      throw std::invalid_argument("unknown group rule '" + kind + "'");
    }
  }
  return config;
}

StudyFileConfig study_config_from_json(const json& j) {
  StudyFileConfig out;
  out.study.replicates = j.value("replicates", 30);
  out.study.split_fraction = j.value("split_fraction", 0.5);
  if (j.contains("epsilon") && !j.at("epsilon").is_null()) {
    out.study.epsilon = j.at("epsilon").get<double>();
  }
  if (j.contains("balance_groups") && !j.at("balance_groups").is_null()) {
    out.study.balance_groups = j.at("balance_groups").get<std::vector<std::string>>();
  }
  out.study.drop_unlisted_groups = j.value("drop_unlisted_groups", false);
  if (j.contains("follow_up_horizon") && !j.at("follow_up_horizon").is_null()) {
    out.study.follow_up_horizon = j.at("follow_up_horizon").get<double>();
  }
  out.study.seed = j.value("seed", std::uint64_t{0});
  const std::string side = j.value("eci_on", std::string("pro"));
  if (side == "pro") {
    out.study.eci_on = StudyConfig::EciSide::pro;
  } else if (side == "ret") {
    out.study.eci_on = StudyConfig::EciSide::ret;
  } else {
    throw std::invalid_argument("eci_on must be 'pro' or 'ret'");
  }
  out.study.scenario = j.value("scenario", std::string("study"));
  out.validation.time_unit = j.value("time_unit", std::string("time"));

  if (j.contains("cox")) {
    const json& c = j.at("cox");
    const std::string tie = c.value("tie_method", std::string("breslow"));
    if (tie == "breslow") {
      out.cox.tie_method = TieMethod::breslow;
    } else if (tie == "efron") {
      out.cox.tie_method = TieMethod::efron;
    } else {
      throw std::invalid_argument("tie_method must be 'breslow' or 'efron'");
    }
    out.cox.max_iter = c.value("max_iter", 100);
    out.cox.tolerance = c.value("tolerance", 1e-9);
    out.cox.standardize = c.value("standardize", true);
  }

  if (j.contains("filters")) {
    for (const json& f : j.at("filters")) {
      RangeFilter filter;
      filter.column = f.at("column").get<std::string>();
      filter.min = f.value("min", -std::numeric_limits<double>::infinity());
      filter.max = f.value("max", std::numeric_limits<double>::infinity());
      out.validation.range_filters.push_back(std::move(filter));
    }
  }
  if (j.contains("fractions")) {
    out.fractions = j.at("fractions").get<std::vector<double>>();
  }
  return out;
}

}  // namespace survci
