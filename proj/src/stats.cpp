#include "survci/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace survci {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double binomial_cdf_half(int k, int n) {
  // P(X <= k), X ~ Binomial(n, 1/2). Small n uses exact integer-valued
  // binomial coefficients (the multiplicative form stays integral, and the
  // final 2^-n scaling is exact); large n falls back to lgamma.
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (n <= 50) {
    double coeff = 1.0, total = 1.0;
    for (int i = 1; i <= k; ++i) {
      coeff = coeff * (n - i + 1) / i;
      total += coeff;
    }
    return std::min(total * std::ldexp(1.0, -n), 1.0);
  }
  double total = 0.0;
  for (int i = 0; i <= k; ++i) {
    total += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                      std::lgamma(n - i + 1.0) - n * std::log(2.0));
  }
  return std::min(total, 1.0);
}

// Null distribution of the U statistic for untied samples: counts[u] is the
// number of pooled orderings with exactly u a-over-b wins. Standard
// recurrence on whether the largest pooled value belongs to sample a
// (contributing nb wins) or to sample b.
std::vector<double> u_counts(int na, int nb) {
  const std::size_t u_max = static_cast<std::size_t>(na) * static_cast<std::size_t>(nb);
  std::vector<std::vector<double>> table(
      static_cast<std::size_t>(na) + 1, std::vector<double>(u_max + 1, 0.0));
  for (int a = 0; a <= na; ++a) table[static_cast<std::size_t>(a)][0] = 1.0;
  for (int b = 1; b <= nb; ++b) {
    std::vector<std::vector<double>> next = table;
    for (int a = 1; a <= na; ++a) {
      for (std::size_t u = 0; u <= static_cast<std::size_t>(a) * static_cast<std::size_t>(b); ++u) {
        const double from_a = u >= static_cast<std::size_t>(b)
                                  ? next[static_cast<std::size_t>(a) - 1][u - static_cast<std::size_t>(b)]
                                  : 0.0;
        next[static_cast<std::size_t>(a)][u] = from_a + table[static_cast<std::size_t>(a)][u];
      }
    }
    table = std::move(next);
  }
  return table[static_cast<std::size_t>(na)];
}

}  // namespace

double normal_quantile(double q) {
  if (!(q > 0.0) || !(q < 1.0)) throw std::invalid_argument("quantile level must be in (0,1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ReplicateSummary replicate_summary(std::vector<double> values, double level) {
  if (values.empty()) throw std::invalid_argument("need at least one value");
  if (!(level > 0.0) || !(level < 1.0)) {
    throw std::invalid_argument("level must be in (0,1)");
  }
  ReplicateSummary s;
  s.level = level;
  s.values = std::move(values);
  const double n = static_cast<double>(s.values.size());
  double mean = 0.0;
  for (double v : s.values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : s.values) ss += (v - mean) * (v - mean);
  s.mean = mean;
  s.sd = s.values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const double half = normal_quantile(0.5 + level / 2.0) * s.sd / std::sqrt(n);
  s.lo = mean - half;
  s.hi = mean + half;
  return s;
}

double sign_test(const std::vector<double>& differences) {
  int positive = 0, negative = 0;
  for (double d : differences) {
    if (d > 0.0) ++positive;
    if (d < 0.0) ++negative;
  }
  const int n = positive + negative;
  if (n == 0) throw std::runtime_error("sign test requires a nonzero difference");
  const int tail = std::min(positive, negative);
  return std::min(1.0, 2.0 * binomial_cdf_half(tail, n));
}

std::pair<double, double> mann_whitney(const std::vector<double>& sample_a,
                                       const std::vector<double>& sample_b) {
  if (sample_a.empty() || sample_b.empty()) {
    throw std::invalid_argument("both samples must be non-empty");
  }
  const double na = static_cast<double>(sample_a.size());
  const double nb = static_cast<double>(sample_b.size());

  double u = 0.0;
  bool any_tie = false;
  for (double a : sample_a) {
    for (double b : sample_b) {
      if (a > b) {
        u += 1.0;
      } else if (a == b) {
        u += 0.5;
        any_tie = true;
      }
    }
  }

  if (!any_tie && sample_a.size() <= 8 && sample_b.size() <= 8) {
    const auto counts = u_counts(static_cast<int>(na), static_cast<int>(nb));
    double total = 0.0;
    for (double c : counts) total += c;
    const double u_small = std::min(u, na * nb - u);
    double tail = 0.0;
    for (std::size_t v = 0; v <= static_cast<std::size_t>(u_small); ++v) tail += counts[v];
    return {u, std::min(1.0, 2.0 * tail / total)};
  }

  // Normal approximation with tie-corrected variance and continuity
  // correction.
  std::map<double, int> pooled;
  for (double a : sample_a) ++pooled[a];
  for (double b : sample_b) ++pooled[b];
  const double n = na + nb;
  double tie_term = 0.0;
  for (const auto& [value, t] : pooled) {
    tie_term += static_cast<double>(t) * t * t - t;
  }
  const double mu = na * nb / 2.0;
  const double var =
      na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) return {u, 1.0};
  const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  return {u, std::min(1.0, 2.0 * (1.0 - normal_cdf(z)))};
}

}  // namespace survci
