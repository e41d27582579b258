#pragma once

#include <Eigen/Core>
#include <optional>

#include "survci/core.hpp"

namespace survci {

// Right-continuous step survival function:
//   S0(t) = 1            for t <  knot_times[0]
//   S0(t) = values[j]    for t in [knot_times[j], knot_times[j+1])
//   S0(t) = tail_value   for t in [knot_times.back(), horizon]
// Member survival is S0(t)^h; the restricted mean integrates to `horizon`.
class BaselineSurvival {
 public:
  static BaselineSurvival make(Eigen::ArrayXd knot_times, Eigen::ArrayXd values,
                               double horizon, double tail_value);

  const Eigen::ArrayXd& knot_times() const { return knot_times_; }
  const Eigen::ArrayXd& values() const { return values_; }
  double horizon() const { return horizon_; }
  double tail_value() const { return tail_value_; }

  double survival_at(double t) const;

  // phi(h) = integral_0^horizon S0(t)^h dt, exact for the step function.
  double restricted_mean(double hazard) const;

 private:
  BaselineSurvival() = default;

  Eigen::ArrayXd knot_times_;
  Eigen::ArrayXd values_;
  double horizon_ = 0.0;
  double tail_value_ = 0.0;

  // Cached per-segment log values / widths so restricted_mean is one
  // vectorized exp pass.
  Eigen::ArrayXd seg_log_values_;
  Eigen::ArrayXd seg_widths_;
};

// Product-limit estimator. Knots sit at distinct event times; censored-only
// times shrink later risk sets but add no knot. Horizon defaults to the
// largest observed time; the tail carries the last survival value.
BaselineSurvival kaplan_meier(const Cohort& cohort,
                              std::optional<double> horizon = {});

// S0(t) = exp(-H0(t)) with the Breslow cumulative hazard
//   H0(t) = sum_{event times t_j <= t} d_j / sum_{i at risk} exp(beta' z_i).
// With beta = 0 this is exp(-Nelson-Aalen).
BaselineSurvival breslow_baseline(const Cohort& cohort,
                                  const Eigen::VectorXd& coefficients,
                                  std::optional<double> horizon = {});

inline double restricted_mean(const BaselineSurvival& baseline, double hazard) {
  return baseline.restricted_mean(hazard);
}

enum class ClampSide { none, at_min, at_max };

struct InversionResult {
  double hazard = 0.0;
  ClampSide clamped = ClampSide::none;
  double residual = 0.0;  // |phi(hazard) - target_time|
};

struct InversionOptions {
  double h_min = 1e-12;
  double h_max = 1e12;
  int max_iter = 200;
  double tolerance = 1e-8;  // absolute, on the time scale
};

// Solves phi(h) = target_time by bisection on log h. phi is strictly
// decreasing wherever some value lies in (0,1); targets outside
// [phi(h_max), phi(h_min)] clamp at the corresponding bound. The bisection
// runs to a machine-tight bracket so that inverted hazards order exactly
// opposite to their targets.
InversionResult invert_hazard(const BaselineSurvival& baseline,
                              double target_time,
                              const InversionOptions& options = {});

struct ObservedHazards {
  HazardAssignment hazards;  // provenance observed_inverted
  std::size_t clamped_min = 0;
  std::size_t clamped_max = 0;
  double max_unclamped_residual = 0.0;
};

// The M* machinery: for every member, the hazard whose restricted mean equals
// its observed time. Requires distinct observed times (perturb first).
ObservedHazards observed_hazards(const Cohort& cohort,
                                 const BaselineSurvival& baseline,
                                 double tolerance = 1e-8);

}  // namespace survci
