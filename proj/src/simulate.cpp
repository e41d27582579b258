#include "survci/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "survci/concordance.hpp"
#include "survci/coxfit.hpp"
#include "survci/evalharness.hpp"
#include "survci/rng.hpp"

namespace survci {

namespace {

constexpr std::uint64_t kCovariateStream = 1;
constexpr std::uint64_t kEventStream = 2;
constexpr std::uint64_t kCensorStream = 3;
constexpr std::uint64_t kGroupStream = 4;
constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_config(const SimulationConfig& config) {
  if (config.m < 2) throw std::invalid_argument("cohort size m must be at least 2");
  if (config.beta.size() != static_cast<Eigen::Index>(config.covariates.size())) {
    throw std::invalid_argument("beta length must match covariate count");
  }
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, ExponentialBaseline>) {
          if (!(b.rate > 0.0)) throw std::invalid_argument("exponential rate must be positive");
        } else if constexpr (std::is_same_v<T, WeibullBaseline>) {
          if (!(b.shape > 0.0) || !(b.scale > 0.0)) {
            throw std::invalid_argument("weibull shape and scale must be positive");
          }
        } else {
          if (b.knots.empty() || b.knots.size() != b.values.size()) {
            throw std::invalid_argument("step baseline needs matching knots and values");
          }
          double prev_t = 0.0, prev_s = 1.0;
          for (std::size_t j = 0; j < b.knots.size(); ++j) {
            if (!(b.knots[j] > prev_t)) {
              throw std::invalid_argument("step baseline knots must be increasing and positive");
            }
            if (b.values[j] < 0.0 || b.values[j] > prev_s) {
              throw std::invalid_argument("step baseline values must be non-increasing in [0,1]");
            }
            prev_t = b.knots[j];
            prev_s = b.values[j];
          }
          if (b.values.back() > 0.0 &&
              config.censoring.kind == CensoringSpec::Kind::none) {
            throw std::invalid_argument(
                "step baseline with positive tail mass requires censoring");
          }
        }
      },
      config.baseline);
  for (const auto& cov : config.covariates) {
    if (cov.dist == CovariateSpec::Dist::bernoulli && (cov.a < 0.0 || cov.a > 1.0)) {
      throw std::invalid_argument("bernoulli p must lie in [0,1]");
    }
    if (cov.dist == CovariateSpec::Dist::uniform && !(cov.b > cov.a)) {
      throw std::invalid_argument("uniform bounds must satisfy a < b");
    }
  }
  switch (config.censoring.kind) {
    case CensoringSpec::Kind::administrative:
      if (!(config.censoring.horizon > 0.0)) {
        throw std::invalid_argument("administrative horizon must be positive");
      }
      break;
    case CensoringSpec::Kind::independent_exponential:
      if (!(config.censoring.rate > 0.0)) {
        throw std::invalid_argument("censoring rate must be positive");
      }
      break;
    case CensoringSpec::Kind::both:
      if (!(config.censoring.horizon > 0.0) || !(config.censoring.rate > 0.0)) {
        throw std::invalid_argument("censoring horizon and rate must be positive");
      }
      break;
    case CensoringSpec::Kind::none:
      break;
  }
  if (config.groups.kind == GroupRule::Kind::multinomial) {
    if (config.groups.labels.empty() ||
        config.groups.labels.size() != config.groups.probs.size()) {
      throw std::invalid_argument("multinomial groups need matching labels and probs");
    }
    double total = 0.0;
    for (double p : config.groups.probs) {
      if (p < 0.0) throw std::invalid_argument("multinomial weights must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("multinomial weights must sum to 1");
    }
  }
  if (config.groups.kind == GroupRule::Kind::covariate_threshold) {
    if (config.groups.labels.size() != config.groups.cutpoints.size() + 1) {
      throw std::invalid_argument("threshold groups need cutpoints.size()+1 labels");
    }
    if (!std::is_sorted(config.groups.cutpoints.begin(), config.groups.cutpoints.end())) {
      throw std::invalid_argument("threshold cutpoints must be ascending");
    }
  }
}

// Event time with S(t) = S0(t)^h via inverse transform of V = S0(T)^h.
double sample_event_time(const BaselineSpec& spec, double hazard, Rng& rng) {
  const double v = rng.uniform_pos();
  return std::visit(
      [&](const auto& b) -> double {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, ExponentialBaseline>) {
          return -std::log(v) / (b.rate * hazard);
        } else if constexpr (std::is_same_v<T, WeibullBaseline>) {
          return b.scale * std::pow(-std::log(v) / hazard, 1.0 / b.shape);
        } else {
          // First knot where S0(t)^h drops to or below v; exact inversion of
          // the piecewise-constant CDF.
          const double target = std::pow(v, 1.0 / hazard);  // compare S0 <= target
          const auto it = std::partition_point(
              b.values.begin(), b.values.end(),
              [&](double s) { return s > target; });
          if (it == b.values.end()) return kInf;  // tail mass; censoring removes it
          return b.knots[static_cast<std::size_t>(it - b.values.begin())];
        }
      },
      spec);
}

double sample_censor_time(const CensoringSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case CensoringSpec::Kind::none:
      return kInf;
    case CensoringSpec::Kind::administrative:
      return spec.horizon;
    case CensoringSpec::Kind::independent_exponential:
      return rng.exponential(spec.rate);
    case CensoringSpec::Kind::both:
      return std::min(spec.horizon, rng.exponential(spec.rate));
  }
  return kInf;
}

std::string member_id(std::size_t index, std::size_t m) {
  std::size_t width = 1;
  for (std::size_t x = m; x >= 10; x /= 10) ++width;
  std::string digits = std::to_string(index + 1);
  return "m" + std::string(width > digits.size() ? width - digits.size() : 0, '0') +
         digits;
}

}  // namespace

double baseline_survival(const BaselineSpec& spec, double t) {
  return std::visit(
      [&](const auto& b) -> double {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, ExponentialBaseline>) {
          return std::exp(-b.rate * t);
        } else if constexpr (std::is_same_v<T, WeibullBaseline>) {
          return std::exp(-std::pow(t / b.scale, b.shape));
        } else {
          if (t < b.knots.front()) return 1.0;
          const auto it = std::upper_bound(b.knots.begin(), b.knots.end(), t);
          return b.values[static_cast<std::size_t>(it - b.knots.begin()) - 1];
        }
      },
      spec);
}

BaselineSurvival discretize_baseline(const BaselineSpec& spec, double horizon,
                                     std::size_t segments) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (const auto* step = std::get_if<StepBaselineSpec>(&spec)) {
    const Eigen::Index k = static_cast<Eigen::Index>(step->knots.size());
    Eigen::ArrayXd kt = Eigen::Map<const Eigen::ArrayXd>(step->knots.data(), k);
    Eigen::ArrayXd sv = Eigen::Map<const Eigen::ArrayXd>(step->values.data(), k);
    const double tau = std::max(horizon, step->knots.back());
    return BaselineSurvival::make(kt, sv, tau, step->values.back());
  }
  if (segments < 2) throw std::invalid_argument("need at least 2 segments");
  Eigen::ArrayXd kt(static_cast<Eigen::Index>(segments));
  Eigen::ArrayXd sv(static_cast<Eigen::Index>(segments));
  const double dt = horizon / static_cast<double>(segments);
  for (std::size_t j = 0; j < segments; ++j) {
    const double t = dt * static_cast<double>(j + 1);
    kt[static_cast<Eigen::Index>(j)] = t;
    sv[static_cast<Eigen::Index>(j)] = baseline_survival(spec, t);
  }
  return BaselineSurvival::make(kt, sv, horizon, sv[static_cast<Eigen::Index>(segments - 1)]);
}

TruthBundle generate_cohort(const SimulationConfig& config) {
  validate_config(config);
  const Rng root(config.seed);
  Rng cov_rng = root.substream(kCovariateStream);
  Rng event_rng = root.substream(kEventStream);
  Rng censor_rng = root.substream(kCensorStream);
  Rng group_rng = root.substream(kGroupStream);

  const std::size_t m = config.m;
  const Eigen::Index p = static_cast<Eigen::Index>(config.covariates.size());

  TruthBundle bundle;
  bundle.true_hazards.provenance = HazardProvenance::true_synthetic;
  bundle.cohort.time_unit = config.time_unit;
  for (const auto& cov : config.covariates) {
    bundle.cohort.covariate_names.push_back(cov.name);
  }

  std::vector<std::string> seen_labels;
  auto note_label = [&](const std::string& label) {
    if (std::find(seen_labels.begin(), seen_labels.end(), label) == seen_labels.end()) {
      seen_labels.push_back(label);
    }
  };

  for (std::size_t i = 0; i < m; ++i) {
    SurvivalRecord rec;
    rec.id = member_id(i, m);
    rec.covariates.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& cov = config.covariates[static_cast<std::size_t>(j)];
      switch (cov.dist) {
        case CovariateSpec::Dist::standard_normal:
          rec.covariates[j] = cov_rng.normal();
          break;
        case CovariateSpec::Dist::bernoulli:
          rec.covariates[j] = cov_rng.bernoulli(cov.a) ? 1.0 : 0.0;
          break;
        case CovariateSpec::Dist::uniform:
          rec.covariates[j] = cov_rng.uniform(cov.a, cov.b);
          break;
      }
    }
    const double hazard = std::exp(config.beta.dot(rec.covariates));
    const double event_time = sample_event_time(config.baseline, hazard, event_rng);
    const double censor_time = sample_censor_time(config.censoring, censor_rng);
    if (!std::isfinite(event_time) && !std::isfinite(censor_time)) {
      throw std::runtime_error("member with infinite event and censoring time");
    }

    switch (config.groups.kind) {
      case GroupRule::Kind::single:
        rec.group = "all";
        break;
      case GroupRule::Kind::multinomial: {
        double u = group_rng.uniform();
        std::size_t bucket = config.groups.labels.size() - 1;
        for (std::size_t l = 0; l < config.groups.probs.size(); ++l) {
          if (u < config.groups.probs[l]) {
            bucket = l;
            break;
          }
          u -= config.groups.probs[l];
        }
        rec.group = config.groups.labels[bucket];
        break;
      }
      case GroupRule::Kind::covariate_threshold: {
        const auto it = std::find(bundle.cohort.covariate_names.begin(),
                                  bundle.cohort.covariate_names.end(),
                                  config.groups.covariate);
        if (it == bundle.cohort.covariate_names.end()) {
          throw std::invalid_argument("threshold covariate '" +
                                      config.groups.covariate + "' not found");
        }
        const double value = rec.covariates[it - bundle.cohort.covariate_names.begin()];
        std::size_t bucket = 0;
        while (bucket < config.groups.cutpoints.size() &&
               value >= config.groups.cutpoints[bucket]) {
          ++bucket;
        }
        rec.group = config.groups.labels[bucket];
        break;
      }
    }
    note_label(rec.group);

    rec.observed_time = std::min(event_time, censor_time);
    rec.event = event_time < censor_time;
    bundle.true_hazards.rates[rec.id] = hazard;
    bundle.true_event_times[rec.id] = event_time;
    bundle.censor_times[rec.id] = censor_time;
    bundle.cohort.records.push_back(std::move(rec));
  }

  // Configured label order when available, appearance order otherwise.
  if (config.groups.kind == GroupRule::Kind::single) {
    bundle.cohort.group_levels = seen_labels;
  } else {
    for (const auto& label : config.groups.labels) {
      if (std::find(seen_labels.begin(), seen_labels.end(), label) != seen_labels.end()) {
        bundle.cohort.group_levels.push_back(label);
      }
    }
  }
  return bundle;
}

double monte_carlo_win_probability(const BaselineSpec& baseline, double h_i,
                                   double h_j, std::size_t n_pairs,
                                   std::uint64_t seed) {
  if (n_pairs == 0) throw std::invalid_argument("need at least one pair");
  if (!(h_i > 0.0) || !(h_j > 0.0)) {
    throw std::invalid_argument("hazards must be positive");
  }
  Rng rng = Rng(seed).substream(kEventStream);
  std::size_t wins = 0;
  for (std::size_t n = 0; n < n_pairs; ++n) {
    const double ti = sample_event_time(baseline, h_i, rng);
    const double tj = sample_event_time(baseline, h_j, rng);
    wins += ti > tj ? 1 : 0;
  }
  return static_cast<double>(wins) / static_cast<double>(n_pairs);
}

std::vector<double> monte_carlo_realized_ci(const SimulationConfig& config,
                                            ModelRule model_rule,
                                            std::size_t n_reps,
                                            std::uint64_t seed) {
  if (n_reps == 0) throw std::invalid_argument("need at least one replicate");
  const TruthBundle base = generate_cohort(config);

  PredictionModel model;
  if (model_rule == ModelRule::true_model) {
    for (const auto& [id, h] : base.true_hazards.rates) {
      model.predicted_survival[id] = 1.0 / h;  // order-equivalent score
    }
  } else {
    const CoxFit fit = fit_cox(base.cohort);
    const HazardAssignment fitted = predict_hazard_ratios(fit, base.cohort);
    for (const auto& [id, h] : fitted.rates) {
      model.predicted_survival[id] = 1.0 / h;
    }
  }

  const Rng root(seed);
  std::vector<double> realized;
  realized.reserve(n_reps);
  for (std::size_t r = 0; r < n_reps; ++r) {
    Rng event_rng = root.substream(kEventStream, r + 1);
    Rng censor_rng = root.substream(kCensorStream, r + 1);
    Cohort cohort = base.cohort;
    for (auto& rec : cohort.records) {
      const double hazard = base.true_hazards.rates.at(rec.id);
      const double event_time = sample_event_time(config.baseline, hazard, event_rng);
      const double censor_time = sample_censor_time(config.censoring, censor_rng);
      rec.observed_time = std::min(event_time, censor_time);
      rec.event = event_time < censor_time;
    }
    // Censoring at a fixed horizon produces tied observation times; break
    // them before scoring.
    bool tied = false;
    {
      std::vector<double> t;
      t.reserve(cohort.size());
      for (const auto& rec : cohort.records) t.push_back(rec.observed_time);
      std::sort(t.begin(), t.end());
      tied = std::adjacent_find(t.begin(), t.end()) != t.end();
    }
    if (tied) {
      cohort = perturb_ties(cohort, auto_epsilon(cohort), root.substream(5, r + 1).next_u64());
    }
    realized.push_back(c_index(cohort, model).first);
  }
  return realized;
}

}  // namespace survci
