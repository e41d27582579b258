#include "survci/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace survci {

BaselineSurvival BaselineSurvival::make(Eigen::ArrayXd knot_times,
                                        Eigen::ArrayXd values, double horizon,
                                        double tail_value) {
  if (knot_times.size() == 0 || knot_times.size() != values.size()) {
    throw std::invalid_argument("baseline needs matching, non-empty knots and values");
  }
  if (!(knot_times[0] > 0.0)) {
    throw std::invalid_argument("baseline knot times must be positive");
  }
  for (Eigen::Index j = 1; j < knot_times.size(); ++j) {
    if (!(knot_times[j] > knot_times[j - 1])) {
      throw std::invalid_argument("baseline knot times must be strictly increasing");
    }
  }
  double prev = 1.0;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    if (values[j] < 0.0 || values[j] > 1.0 || values[j] > prev) {
      throw std::invalid_argument("baseline values must be non-increasing within [0,1]");
    }
    prev = values[j];
  }
  const Eigen::Index k = values.size();
  if (!(horizon >= knot_times[k - 1])) {
    throw std::invalid_argument("horizon must not precede the last knot");
  }
  if (tail_value < 0.0 || tail_value > values[k - 1]) {
    throw std::invalid_argument("tail_value must lie in [0, last value]");
  }

  BaselineSurvival b;
  b.knot_times_ = std::move(knot_times);
  b.values_ = std::move(values);
  b.horizon_ = horizon;
  b.tail_value_ = tail_value;

  // Segment j in [t_j, t_{j+1}) carries values[j]; the final segment
  // [t_{k-1}, horizon] carries tail_value.
  b.seg_log_values_.resize(k);
  b.seg_widths_.resize(k);
  for (Eigen::Index j = 0; j + 1 < k; ++j) {
    b.seg_log_values_[j] = std::log(b.values_[j]);
    b.seg_widths_[j] = b.knot_times_[j + 1] - b.knot_times_[j];
  }
  b.seg_log_values_[k - 1] = std::log(b.tail_value_);
  b.seg_widths_[k - 1] = b.horizon_ - b.knot_times_[k - 1];
  return b;
}

double BaselineSurvival::survival_at(double t) const {
  if (t < knot_times_[0]) return 1.0;
  if (t >= knot_times_[knot_times_.size() - 1]) return tail_value_;
  // Last knot <= t.
  const double* begin = knot_times_.data();
  const double* end = begin + knot_times_.size();
  const auto it = std::upper_bound(begin, end, t);
  return values_[it - begin - 1];
}

double BaselineSurvival::restricted_mean(double hazard) const {
  if (!(hazard > 0.0) || !std::isfinite(hazard)) {
    throw std::invalid_argument("hazard must be positive and finite");
  }
  // s^h = exp(h log s); log s = -inf contributes exactly 0.
  const double tail_sum =
      (seg_widths_ * (hazard * seg_log_values_).exp()).sum();
  return knot_times_[0] + tail_sum;
}

namespace {

struct TimeOrder {
  std::vector<std::size_t> index;  // record index, times ascending
  Eigen::VectorXd times;           // sorted
  std::vector<char> event;         // sorted
};

TimeOrder sort_by_time(const Cohort& cohort) {
  TimeOrder o;
  o.index.resize(cohort.size());
  std::iota(o.index.begin(), o.index.end(), std::size_t{0});
  std::sort(o.index.begin(), o.index.end(), [&](std::size_t a, std::size_t b) {
    return cohort.records[a].observed_time < cohort.records[b].observed_time;
  });
  o.times.resize(static_cast<Eigen::Index>(cohort.size()));
  o.event.resize(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    o.times[static_cast<Eigen::Index>(i)] = cohort.records[o.index[i]].observed_time;
    o.event[i] = cohort.records[o.index[i]].event ? 1 : 0;
  }
  return o;
}

}  // namespace

BaselineSurvival kaplan_meier(const Cohort& cohort,
                              std::optional<double> horizon) {
  if (cohort.size() == 0) throw std::invalid_argument("empty cohort");
  if (cohort.event_count() == 0) throw std::runtime_error("no events");

  const TimeOrder o = sort_by_time(cohort);
  const std::size_t m = cohort.size();

  std::vector<double> knots;
  std::vector<double> surv;
  double s = 1.0;
  std::size_t i = 0;
  while (i < m) {
    const double t = o.times[static_cast<Eigen::Index>(i)];
    const std::size_t at_risk = m - i;
    std::size_t deaths = 0;
    std::size_t j = i;
    while (j < m && o.times[static_cast<Eigen::Index>(j)] == t) {
      deaths += o.event[j] ? 1 : 0;
      ++j;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      knots.push_back(t);
      surv.push_back(s);
    }
    i = j;
  }

  const double tau = horizon.value_or(o.times[static_cast<Eigen::Index>(m - 1)]);
  Eigen::ArrayXd kt = Eigen::Map<const Eigen::ArrayXd>(knots.data(),
                                                       static_cast<Eigen::Index>(knots.size()));
  Eigen::ArrayXd sv = Eigen::Map<const Eigen::ArrayXd>(surv.data(),
                                                       static_cast<Eigen::Index>(surv.size()));
  return BaselineSurvival::make(kt, sv, tau, surv.back());
}

BaselineSurvival breslow_baseline(const Cohort& cohort,
                                  const Eigen::VectorXd& coefficients,
                                  std::optional<double> horizon) {
  if (cohort.size() == 0) throw std::invalid_argument("empty cohort");
  if (coefficients.size() != cohort.covariate_dim()) {
    throw std::invalid_argument("coefficient length does not match covariate dimension");
  }
  if (cohort.event_count() == 0) throw std::runtime_error("no events");

  const TimeOrder o = sort_by_time(cohort);
  const std::size_t m = cohort.size();

  // Risk sums use exp(eta - eta_max) for overflow safety; the factor is
  // restored in the denominator below.
  Eigen::VectorXd eta(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    eta[static_cast<Eigen::Index>(i)] =
        coefficients.dot(cohort.records[o.index[i]].covariates);
  }
  const double eta_max = eta.maxCoeff();
  Eigen::VectorXd w = (eta.array() - eta_max).exp().matrix();

  // Suffix sums give the risk-set denominator at each sorted position.
  Eigen::VectorXd suffix(static_cast<Eigen::Index>(m));
  double acc = 0.0;
  for (std::size_t i = m; i-- > 0;) {
    acc += w[static_cast<Eigen::Index>(i)];
    suffix[static_cast<Eigen::Index>(i)] = acc;
  }

  std::vector<double> knots;
  std::vector<double> surv;
  double cumhaz = 0.0;
  std::size_t i = 0;
  while (i < m) {
    const double t = o.times[static_cast<Eigen::Index>(i)];
    std::size_t deaths = 0;
    std::size_t j = i;
    while (j < m && o.times[static_cast<Eigen::Index>(j)] == t) {
      deaths += o.event[j] ? 1 : 0;
      ++j;
    }
    if (deaths > 0) {
      cumhaz += static_cast<double>(deaths) /
                (suffix[static_cast<Eigen::Index>(i)] * std::exp(eta_max));
      knots.push_back(t);
      surv.push_back(std::exp(-cumhaz));
    }
    i = j;
  }

  const double tau = horizon.value_or(o.times[static_cast<Eigen::Index>(m - 1)]);
  Eigen::ArrayXd kt = Eigen::Map<const Eigen::ArrayXd>(knots.data(),
                                                       static_cast<Eigen::Index>(knots.size()));
  Eigen::ArrayXd sv = Eigen::Map<const Eigen::ArrayXd>(surv.data(),
                                                       static_cast<Eigen::Index>(surv.size()));
  return BaselineSurvival::make(kt, sv, tau, surv.back());
}

InversionResult invert_hazard(const BaselineSurvival& baseline,
                              double target_time,
                              const InversionOptions& options) {
  if (!(target_time > 0.0) || !std::isfinite(target_time)) {
    throw std::invalid_argument("target_time must be positive and finite");
  }

  const double phi_at_min = baseline.restricted_mean(options.h_min);
  if (target_time >= phi_at_min) {
    return {options.h_min, ClampSide::at_min, std::abs(phi_at_min - target_time)};
  }
  const double phi_at_max = baseline.restricted_mean(options.h_max);
  if (target_time <= phi_at_max) {
    return {options.h_max, ClampSide::at_max, std::abs(phi_at_max - target_time)};
  }

  // Invariant: phi(lo) > target > phi(hi). Bisect on log h until the bracket
  // is machine-tight; stopping at the residual tolerance alone would leave
  // near-tied targets with arbitrarily ordered hazards.
  double lo = options.h_min;
  double hi = options.h_max;
  double mid = std::sqrt(lo * hi);
  for (int it = 0; it < options.max_iter; ++it) {
    mid = std::sqrt(lo * hi);
    const double value = baseline.restricted_mean(mid);
    if (value > target_time) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * lo) break;
  }
  mid = std::sqrt(lo * hi);
  return {mid, ClampSide::none,
          std::abs(baseline.restricted_mean(mid) - target_time)};
}

ObservedHazards observed_hazards(const Cohort& cohort,
                                 const BaselineSurvival& baseline,
                                 double tolerance) {
  ObservedHazards out;
  out.hazards.provenance = HazardProvenance::observed_inverted;
  InversionOptions options;
  options.tolerance = tolerance;
  for (const auto& rec : cohort.records) {
    const InversionResult r = invert_hazard(baseline, rec.observed_time, options);
    out.hazards.rates[rec.id] = r.hazard;
    switch (r.clamped) {
      case ClampSide::at_min: ++out.clamped_min; break;
      case ClampSide::at_max: ++out.clamped_max; break;
      case ClampSide::none:
        out.max_unclamped_residual = std::max(out.max_unclamped_residual, r.residual);
        break;
    }
  }
  return out;
}

}  // namespace survci
