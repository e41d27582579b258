// survci command line: simulate synthetic cohorts, evaluate discrimination
// metrics over repeated random splits, sweep split fractions, re-render
// reports. Exit codes: 0 ok, 1 runtime failure, 2 config/validation error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "survci/core.hpp"
#include "survci/evalharness.hpp"
#include "survci/io.hpp"
#include "survci/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct CommonArgs {
  std::string config_path;
  std::string cohort_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

int default_threads() {
  if (const char* env = std::getenv("SURVCI_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

void print_exception(const std::exception& e, int depth = 0) {
  std::cerr << (depth == 0 ? "error: " : "  caused by: ") << e.what() << '\n';
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_exception(inner, depth + 1);
  } catch (...) {
  }
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  return json::parse(in);
}

// The manifest lands before any result file so aborted runs stay auditable.
void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::string& config_path, std::uint64_t seed) {
  fs::create_directories(out_dir);
  const json manifest{{"command", command},
                      {"config_path", config_path},
                      {"seed", seed},
                      {"output_dir", out_dir.string()},
                      {"tool_version", kToolVersion}};
  std::ofstream out(out_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

// Result files are staged in memory and only land on success; a failed run
// leaves nothing but the manifest behind.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) {
    files_.emplace_back(name, std::move(content));
  }

  void commit() {
    for (const auto& [name, content] : files_) {
      write_text(dir_ / name, content);
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

survci::Cohort load_cohort(const CommonArgs& args,
                           const survci::ValidationPolicy& policy) {
  const auto raw = survci::read_cohort_csv_file(args.cohort_path);
  survci::ValidationReport report;
  auto cohort = survci::validate_cohort(
      raw.records, static_cast<Eigen::Index>(raw.covariate_names.size()),
      raw.covariate_names, policy, &report);
  if (report.total_dropped() > 0) {
    std::cerr << "validation dropped " << report.total_dropped() << " of "
              << raw.records.size() << " records (missing "
              << report.dropped_missing << ", nonpositive time "
              << report.dropped_nonpositive_time;
    for (const auto& [col, n] : report.dropped_range) {
      std::cerr << ", " << col << " range " << n;
    }
    std::cerr << ")\n";
  }
  return cohort;
}

int cmd_simulate(const CommonArgs& args) {
  json j = load_json(args.config_path);
  if (args.seed) j["seed"] = *args.seed;
  const auto config = survci::simulation_config_from_json(j);
  write_manifest(args.out_dir, "simulate", args.config_path, config.seed);

  const auto bundle = survci::generate_cohort(config);
  OutputSet outputs{args.out_dir};
  {
    std::ostringstream os;
    survci::write_cohort_csv(os, bundle.cohort);
    outputs.add("cohort.csv", os.str());
  }
  outputs.add("truth.json", survci::truth_to_json(bundle).dump(2) + "\n");
  outputs.commit();
  return 0;
}

int cmd_evaluate(const CommonArgs& args) {
  json j = load_json(args.config_path);
  if (args.seed) j["seed"] = *args.seed;
  auto config = survci::study_config_from_json(j);
  write_manifest(args.out_dir, "evaluate", args.config_path, config.study.seed);

  const auto cohort = load_cohort(args, config.validation);
  const auto result = survci::run_study(cohort, config.study, config.cox,
                                        args.threads);
  OutputSet outputs{args.out_dir};
  outputs.add("report.json", survci::study_result_to_json(result).dump(2) + "\n");
  {
    std::ostringstream os;
    survci::write_summary_csv(os, result);
    outputs.add("summary.csv", os.str());
  }
  outputs.add("tables.md", survci::study_tables_markdown(result));
  outputs.commit();
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  json j = load_json(args.config_path);
  if (args.seed) j["seed"] = *args.seed;
  auto config = survci::study_config_from_json(j);
  if (config.fractions.empty()) {
    throw std::invalid_argument("sweep config needs a non-empty 'fractions' list");
  }
  write_manifest(args.out_dir, "sweep", args.config_path, config.study.seed);

  const auto cohort = load_cohort(args, config.validation);
  const auto sweep = survci::split_sweep(cohort, config.fractions, config.study,
                                         config.cox, args.threads);
  OutputSet outputs{args.out_dir};
  outputs.add("sweep.csv", survci::sweep_csv(sweep));
  outputs.add("sweep.md", survci::sweep_markdown(sweep));
  outputs.commit();
  return 0;
}

// Re-render summary.csv and tables.md from an existing report.json.
int cmd_report(const CommonArgs& args) {
  const json j = load_json(args.config_path);
  write_manifest(args.out_dir, "report", args.config_path, 0);

  survci::StudyResult result;
  result.scenario = j.value("scenario", std::string("study"));
  for (const json& rj : j.at("replicates")) {
    survci::ReplicateOutcome o;
    o.replicate = rj.at("replicate").get<int>();
    o.report.ci = rj.at("ci").get<double>();
    o.report.eci = rj.at("eci").get<double>();
    o.report.dr = rj.at("dr").get<double>();
    o.report.pair_count = rj.at("pair_count").get<std::int64_t>();
    for (const json& gj : rj.at("per_group")) {
      survci::GroupReport g;
      g.label = gj.at("label").get<std::string>();
      g.subci = gj.at("subci").get<double>();
      g.subeci = gj.at("subeci").get<double>();
      g.subdr = gj.at("subdr").get<double>();
      g.pair_count = gj.at("pair_count").get<std::int64_t>();
      if (!gj.at("within_subci").is_null()) {
        g.within_subci = gj.at("within_subci").get<double>();
      }
      o.report.per_group.push_back(std::move(g));
    }
    result.replicates.push_back(std::move(o));
  }

  // Rebuild the summaries from the per-replicate values.
  std::vector<double> ci, eci, dr;
  for (const auto& o : result.replicates) {
    ci.push_back(o.report.ci);
    eci.push_back(o.report.eci);
    dr.push_back(o.report.dr);
  }
  result.summaries.ci = survci::replicate_summary(ci);
  result.summaries.eci = survci::replicate_summary(eci);
  result.summaries.dr = survci::replicate_summary(dr);
  for (std::size_t l = 0; l < result.replicates.front().report.per_group.size(); ++l) {
    survci::GroupSummary g;
    g.label = result.replicates.front().report.per_group[l].label;
    std::vector<double> subci, subeci, subdr, diffs;
    for (const auto& o : result.replicates) {
      const auto& gr = o.report.per_group.at(l);
      subci.push_back(gr.subci);
      subeci.push_back(gr.subeci);
      subdr.push_back(gr.subdr);
      diffs.push_back(gr.subci - o.report.ci);
    }
    g.subci = survci::replicate_summary(subci);
    g.subeci = survci::replicate_summary(subeci);
    g.subdr = survci::replicate_summary(subdr);
    bool any = false;
    for (double d : diffs) any = any || d != 0.0;
    g.sign_p = any ? survci::sign_test(diffs) : 1.0;
    g.mw_p = survci::mann_whitney(subci, ci).second;
    g.sign_significant = g.sign_p < 0.05;
    g.mw_significant = g.mw_p < 0.05;
    result.summaries.per_group.push_back(std::move(g));
  }

  OutputSet outputs{args.out_dir};
  {
    std::ostringstream os;
    survci::write_summary_csv(os, result);
    outputs.add("summary.csv", os.str());
  }
  outputs.add("tables.md", survci::study_tables_markdown(result));
  outputs.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrimination metrics and expected C-Index bounds for "
               "proportional-hazards survival models"};
  app.require_subcommand(1);

  CommonArgs args;
  args.threads = default_threads();

  auto add_common = [&](CLI::App* cmd, bool needs_cohort) {
    cmd->add_option("--config", args.config_path, "JSON config file")->required();
    if (needs_cohort) {
      cmd->add_option("--cohort", args.cohort_path, "cohort CSV file")->required();
    }
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--threads", args.threads, "worker threads for replicates");
  };

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic cohort");
  add_common(simulate, false);
  auto* evaluate = app.add_subcommand("evaluate", "run the split study on a cohort");
  add_common(evaluate, true);
  auto* sweep = app.add_subcommand("sweep", "sd of ECI across split fractions");
  add_common(sweep, true);
  auto* report = app.add_subcommand("report", "re-render tables from report.json");
  report->add_option("--config", args.config_path, "existing report.json")->required();
  report->add_option("--out", args.out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(args);
    if (evaluate->parsed()) return cmd_evaluate(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (report->parsed()) return cmd_report(args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    print_exception(e);
    return 1;
  }
  return 2;
}
