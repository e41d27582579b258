#include "survci/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "survci/baseline.hpp"
#include "survci/concordance.hpp"
#include "survci/rng.hpp"

namespace survci {

namespace {

constexpr std::uint64_t kBalanceStream = 10;
constexpr std::uint64_t kPerturbStream = 11;
constexpr std::uint64_t kSplitStream = 12;

// Subsets keep the parent's level order, restricted to labels still present.
Cohort subset(const Cohort& parent, const std::vector<std::size_t>& keep) {
  Cohort out;
  out.covariate_names = parent.covariate_names;
  out.time_unit = parent.time_unit;
  out.records.reserve(keep.size());
  std::unordered_set<std::string> present;
  for (std::size_t i : keep) {
    out.records.push_back(parent.records[i]);
    present.insert(parent.records[i].group);
  }
  for (const auto& label : parent.group_levels) {
    if (present.count(label)) out.group_levels.push_back(label);
  }
  return out;
}

}  // namespace

Cohort perturb_ties(const Cohort& cohort, double epsilon, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  Rng rng(seed);
  Cohort out = cohort;
  for (auto& rec : out.records) {
    rec.observed_time += rng.uniform(0.0, epsilon);
  }
  // A small epsilon can put several addends on the same representable double;
  // a minimal monotone sweep finishes the job the uniform offsets started.
  std::vector<std::size_t> order(out.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ta = out.records[a].observed_time;
    const double tb = out.records[b].observed_time;
    return ta != tb ? ta < tb : a < b;
  });
  double prev = 0.0;
  for (std::size_t idx : order) {
    double& t = out.records[idx].observed_time;
    if (!(t > prev)) {
      t = std::nextafter(prev, std::numeric_limits<double>::infinity());
    }
    prev = t;
  }
  return out;
}

double auto_epsilon(const Cohort& cohort) {
  std::vector<double> t;
  t.reserve(cohort.size());
  for (const auto& rec : cohort.records) t.push_back(rec.observed_time);
  std::sort(t.begin(), t.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double g = t[i] - t[i - 1];
    if (g > 0.0) gap = std::min(gap, g);
  }
  if (!std::isfinite(gap)) {
    // All times coincide; scale by the common value instead.
    return 1e-6 * (t.empty() ? 1.0 : t.front());
  }
  return 1e-6 * gap;
}

Cohort administrative_censor(const Cohort& cohort, double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  Cohort out = cohort;
  for (auto& rec : out.records) {
    if (rec.observed_time > horizon) {
      rec.observed_time = horizon;
      rec.event = false;
    }
  }
  return out;
}

Cohort undersample_balance(const Cohort& cohort,
                           const std::vector<std::string>& labels,
                           std::uint64_t seed, bool drop_unlisted) {
  if (labels.empty()) throw std::invalid_argument("no groups listed for balancing");
  std::unordered_map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    members[cohort.records[i].group].push_back(i);
  }
  std::size_t target = std::numeric_limits<std::size_t>::max();
  for (const auto& label : labels) {
    const auto it = members.find(label);
    if (it == members.end() || it->second.empty()) {
      throw std::runtime_error("empty group '" + label + "'");
    }
    target = std::min(target, it->second.size());
  }

  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (const auto& label : labels) {
    auto idx = members[label];
    rng.shuffle(idx);
    idx.resize(target);
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  if (!drop_unlisted) {
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      if (std::find(labels.begin(), labels.end(), cohort.records[i].group) ==
          labels.end()) {
        keep.push_back(i);
      }
    }
  }
  std::sort(keep.begin(), keep.end());  // original record order
  return subset(cohort, keep);
}

std::pair<Cohort, Cohort> split(const Cohort& cohort, double fraction,
                                std::uint64_t seed) {
  if (!(fraction > 0.0) || !(fraction < 1.0)) {
    throw std::invalid_argument("split fraction must lie in (0,1)");
  }
  const std::size_t m = cohort.size();
  if (m < 2) throw std::invalid_argument("need at least 2 members to split");
  const std::size_t n_ret = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(m)));
  if (n_ret == 0 || n_ret >= m) throw std::runtime_error("degenerate split");

  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  std::vector<std::size_t> ret(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_ret));
  std::vector<std::size_t> pro(idx.begin() + static_cast<std::ptrdiff_t>(n_ret), idx.end());
  std::sort(ret.begin(), ret.end());
  std::sort(pro.begin(), pro.end());
  return {subset(cohort, ret), subset(cohort, pro)};
}

namespace {

ReplicateOutcome run_replicate(const Cohort& cohort, const StudyConfig& study,
                               const CoxOptions& cox_options, int r) {
  const Rng root(study.seed);
  const std::uint64_t rep = static_cast<std::uint64_t>(r) + 1;

  Cohort work = cohort;
  if (!study.balance_groups.empty()) {
    work = undersample_balance(work, study.balance_groups,
                               root.substream(kBalanceStream, rep).next_u64(),
                               study.drop_unlisted_groups);
  }
  if (study.follow_up_horizon) {
    work = administrative_censor(work, *study.follow_up_horizon);
  }
  const double epsilon = study.epsilon.value_or(auto_epsilon(work));
  work = perturb_ties(work, epsilon,
                      root.substream(kPerturbStream, rep).next_u64());
  auto [ret, pro] =
      split(work, study.split_fraction, root.substream(kSplitStream, rep).next_u64());

  ReplicateOutcome out;
  out.replicate = r;
  out.epsilon_used = epsilon;
  out.ret_size = ret.size();

  out.fit = fit_cox(ret, cox_options);
  const BaselineSurvival baseline = breslow_baseline(ret, out.fit.coefficients);

  // M* ranks by observed time. Scoring it by the (distinct, perturbed) times
  // matches the inverted-hazard ordering wherever the inversion resolves and
  // stays well defined across clamped blocks, whose restricted means tie.
  const auto star_model_for = [](const Cohort& side) {
    PredictionModel model;
    for (const auto& rec : side.records) {
      model.predicted_survival[rec.id] = rec.observed_time;
    }
    return model;
  };

  // Self check: the perfect retrospective model scores 1 by construction.
  out.ret_ci_mstar = c_index(ret, star_model_for(ret)).first;
  out.self_check_passed = out.ret_ci_mstar == 1.0;

  const Cohort& eval = study.eci_on == StudyConfig::EciSide::ret ? ret : pro;
  out.eval_size = eval.size();
  const ObservedHazards star_eval = observed_hazards(eval, baseline);
  out.clamped_min = star_eval.clamped_min;
  out.clamped_max = star_eval.clamped_max;

  // The fitted model's ordering is the reverse hazard-ratio ordering; the
  // reciprocal is the same ranking without the restricted-mean collapse that
  // extreme rates would suffer.
  const HazardAssignment fitted_rates = predict_hazard_ratios(out.fit, eval);
  PredictionModel model_fit;
  for (const auto& [id, rate] : fitted_rates.rates) {
    model_fit.predicted_survival[id] = 1.0 / rate;
  }
  out.report = concordance_report(eval, model_fit, star_eval.hazards,
                                  star_model_for(eval));
  return out;
}

std::vector<ReplicateOutcome> run_replicates(const Cohort& cohort,
                                             const StudyConfig& study,
                                             const CoxOptions& cox_options,
                                             int threads) {
  if (study.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(study.replicates));

  const int workers = std::max(1, std::min(threads, study.replicates));
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= study.replicates) return;
      try {
        outcomes[static_cast<std::size_t>(r)] =
            run_replicate(cohort, study, cox_options, r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) {
          try {
            std::throw_with_nested(std::runtime_error(
                "replicate " + std::to_string(r) + " failed"));
          } catch (...) {
            first_error = std::current_exception();
          }
        }
        return;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return outcomes;
}

StudySummaries summarize(const std::vector<ReplicateOutcome>& outcomes) {
  StudySummaries s;
  std::vector<double> ci, eci, dr;
  for (const auto& o : outcomes) {
    ci.push_back(o.report.ci);
    eci.push_back(o.report.eci);
    dr.push_back(o.report.dr);
  }
  s.ci = replicate_summary(ci);
  s.eci = replicate_summary(eci);
  s.dr = replicate_summary(dr);

  const auto& labels = outcomes.front().report.per_group;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    GroupSummary g;
    g.label = labels[l].label;
    std::vector<double> subci, subeci, subdr, diffs;
    for (const auto& o : outcomes) {
      if (l >= o.report.per_group.size() || o.report.per_group[l].label != g.label) {
        throw std::runtime_error("group '" + g.label +
                                 "' missing from a replicate report");
      }
      const auto& gr = o.report.per_group[l];
      subci.push_back(gr.subci);
      subeci.push_back(gr.subeci);
      subdr.push_back(gr.subdr);
      diffs.push_back(gr.subci - o.report.ci);
    }
    g.subci = replicate_summary(subci);
    g.subeci = replicate_summary(subeci);
    g.subdr = replicate_summary(subdr);
    const bool any_nonzero = std::any_of(diffs.begin(), diffs.end(),
                                         [](double d) { return d != 0.0; });
    g.sign_p = any_nonzero ? sign_test(diffs) : 1.0;
    g.mw_p = mann_whitney(subci, ci).second;
    g.sign_significant = g.sign_p < 0.05;
    g.mw_significant = g.mw_p < 0.05;
    s.per_group.push_back(std::move(g));
  }
  return s;
}

}  // namespace

StudyResult run_study(const Cohort& cohort, const StudyConfig& study,
                      const CoxOptions& cox_options, int threads) {
  if (!(study.split_fraction > 0.0) || !(study.split_fraction < 1.0)) {
    throw std::invalid_argument("split fraction must lie in (0,1)");
  }
  StudyResult result;
  result.scenario = study.scenario;
  result.time_unit = cohort.time_unit;
  result.covariate_names = cohort.covariate_names;
  result.replicates = run_replicates(cohort, study, cox_options, threads);
  result.summaries = summarize(result.replicates);
  return result;
}

std::map<double, ReplicateSummary> split_sweep(const Cohort& cohort,
                                               const std::vector<double>& fractions,
                                               const StudyConfig& base,
                                               const CoxOptions& cox_options,
                                               int threads) {
  if (fractions.empty()) throw std::invalid_argument("no fractions given");
  std::map<double, ReplicateSummary> out;
  for (double f : fractions) {
    if (!(f > 0.0) || !(f < 1.0)) {
      throw std::invalid_argument("split fraction must lie in (0,1)");
    }
    if (out.count(f)) throw std::invalid_argument("duplicate fraction in sweep");
    StudyConfig study = base;
    study.split_fraction = f;
    const StudyResult result = run_study(cohort, study, cox_options, threads);
    std::vector<double> eci;
    for (const auto& o : result.replicates) eci.push_back(o.report.eci);
    out.emplace(f, replicate_summary(eci));
  }
  return out;
}

std::map<double, ReplicateSummary> split_sweep(const Cohort& cohort,
                                               const std::vector<double>& fractions,
                                               int replicates, std::uint64_t seed) {
  StudyConfig base;
  base.replicates = replicates;
  base.seed = seed;
  return split_sweep(cohort, fractions, base);
}

}  // namespace survci
