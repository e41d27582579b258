#pragma once

#include <utility>
#include <vector>

namespace survci {

struct ReplicateSummary {
  std::vector<double> values;
  double mean = 0.0;
  double sd = 0.0;       // sample standard deviation; 0 when n = 1
  double lo = 0.0;       // normal-approximation interval bounds
  double hi = 0.0;
  double level = 0.95;
};

// mean +/- z_level * sd / sqrt(n).
ReplicateSummary replicate_summary(std::vector<double> values, double level = 0.95);

// Exact two-sided binomial sign test; zero differences are dropped first.
double sign_test(const std::vector<double>& differences);

// U counts a-over-b wins with ties worth 0.5. p is exact for small untied
// samples (both sizes <= 8) and otherwise uses the normal approximation with
// continuity and tie corrections.
std::pair<double, double> mann_whitney(const std::vector<double>& sample_a,
                                       const std::vector<double>& sample_b);

// Standard normal quantile, used for the summary intervals.
double normal_quantile(double q);

}  // namespace survci
