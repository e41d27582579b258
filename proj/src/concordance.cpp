#include "survci/concordance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace survci {

namespace {

// Record indices sorted by observed time, ascending. Throws on ties: the pair
// universe is only well defined for distinct times.
std::vector<std::size_t> time_order_checked(const Cohort& cohort) {
  std::vector<std::size_t> order(cohort.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cohort.records[a].observed_time < cohort.records[b].observed_time;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (cohort.records[order[i]].observed_time ==
        cohort.records[order[i - 1]].observed_time) {
      throw std::invalid_argument("tied observed times; run perturb_ties first");
    }
  }
  return order;
}

// Visits every comparable pair once as (i, j) with T~_i > T~_j and delta_j = 1.
// Pairs are never materialized; memory stays O(m).
template <typename Visitor>
std::int64_t for_each_comparable(const Cohort& cohort,
                                 const std::vector<std::size_t>& order,
                                 Visitor&& visit) {
  std::int64_t count = 0;
  for (std::size_t a = 0; a < order.size(); ++a) {
    const std::size_t j = order[a];
    if (!cohort.records[j].event) continue;
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      visit(order[b], j);
      ++count;
    }
  }
  return count;
}

double checked_prediction_gap(double pred_i, double pred_j) {
  if (pred_i == pred_j) {
    throw std::invalid_argument("tied predictions in a comparable pair; perturb first");
  }
  return pred_i - pred_j;
}

}  // namespace

double pairwise_win_probability(double h_i, double h_j) {
  if (!(h_i > 0.0) || !(h_j > 0.0) || !std::isfinite(h_i) || !std::isfinite(h_j)) {
    throw std::invalid_argument("hazards must be positive and finite");
  }
  return h_j / (h_i + h_j);
}

std::pair<double, PairUniverse> c_index(const Cohort& cohort,
                                        const PredictionModel& model) {
  const auto order = time_order_checked(cohort);
  const Eigen::VectorXd pred = model.aligned(cohort);
  const std::vector<int> group = cohort.group_index();

  PairUniverse universe;
  universe.per_group.assign(cohort.group_levels.size(), 0);
  std::int64_t concordant = 0;
  universe.comparable_pairs = for_each_comparable(
      cohort, order, [&](std::size_t i, std::size_t j) {
        const double gap = checked_prediction_gap(
            pred[static_cast<Eigen::Index>(i)], pred[static_cast<Eigen::Index>(j)]);
        concordant += gap > 0.0 ? 1 : 0;
        ++universe.per_group[static_cast<std::size_t>(group[i])];
        ++universe.per_group[static_cast<std::size_t>(group[j])];
      });
  if (universe.comparable_pairs == 0) throw std::runtime_error("no comparable pairs");
  return {static_cast<double>(concordant) /
              static_cast<double>(universe.comparable_pairs),
          universe};
}

double expected_c_index(const Cohort& cohort, const HazardAssignment& hazards,
                        const PredictionModel& model) {
  const auto order = time_order_checked(cohort);
  const Eigen::VectorXd pred = model.aligned(cohort);
  const Eigen::VectorXd h = hazards.aligned(cohort);

  double credit = 0.0;
  const std::int64_t pairs = for_each_comparable(
      cohort, order, [&](std::size_t i, std::size_t j) {
        const double gap = checked_prediction_gap(
            pred[static_cast<Eigen::Index>(i)], pred[static_cast<Eigen::Index>(j)]);
        const double hi = h[static_cast<Eigen::Index>(i)];
        const double hj = h[static_cast<Eigen::Index>(j)];
        credit += gap > 0.0 ? hj / (hi + hj) : hi / (hi + hj);
      });
  if (pairs == 0) throw std::runtime_error("no comparable pairs");
  return credit / static_cast<double>(pairs);
}

double uncensored_expected_c_index(const Cohort& cohort,
                                   const HazardAssignment& hazards,
                                   const PredictionModel& model) {
  for (const auto& rec : cohort.records) {
    if (!rec.event) throw std::runtime_error("uncensored case only");
  }
  // With every event observed the pair universe is all m(m-1)/2 pairs.
  return expected_c_index(cohort, hazards, model);
}

namespace {

struct GroupAccum {
  std::int64_t pairs = 0;          // K_l
  std::int64_t concordant = 0;     // fitted-model wins
  double credit = 0.0;             // star-model expected wins
  std::int64_t within_pairs = 0;
  std::int64_t within_concordant = 0;
};

}  // namespace

double sub_c_index(const Cohort& cohort, const PredictionModel& model,
                   const std::string& label) {
  const int level = cohort.level_of(label);
  if (level < 0) throw std::invalid_argument("unknown group label '" + label + "'");
  const auto order = time_order_checked(cohort);
  const Eigen::VectorXd pred = model.aligned(cohort);
  const std::vector<int> group = cohort.group_index();

  std::int64_t pairs = 0;
  std::int64_t concordant = 0;
  for_each_comparable(cohort, order, [&](std::size_t i, std::size_t j) {
    const int touches = (group[i] == level ? 1 : 0) + (group[j] == level ? 1 : 0);
    if (touches == 0) return;
    const double gap = checked_prediction_gap(pred[static_cast<Eigen::Index>(i)],
                                              pred[static_cast<Eigen::Index>(j)]);
    pairs += touches;
    concordant += gap > 0.0 ? touches : 0;
  });
  if (pairs == 0) throw std::runtime_error("no comparable pairs for group '" + label + "'");
  return static_cast<double>(concordant) / static_cast<double>(pairs);
}

double within_sub_c_index(const Cohort& cohort, const PredictionModel& model,
                          const std::string& label) {
  const int level = cohort.level_of(label);
  if (level < 0) throw std::invalid_argument("unknown group label '" + label + "'");
  const auto order = time_order_checked(cohort);
  const Eigen::VectorXd pred = model.aligned(cohort);
  const std::vector<int> group = cohort.group_index();

  std::int64_t pairs = 0;
  std::int64_t concordant = 0;
  for_each_comparable(cohort, order, [&](std::size_t i, std::size_t j) {
    if (group[i] != level || group[j] != level) return;
    const double gap = checked_prediction_gap(pred[static_cast<Eigen::Index>(i)],
                                              pred[static_cast<Eigen::Index>(j)]);
    ++pairs;
    concordant += gap > 0.0 ? 1 : 0;
  });
  if (pairs == 0) {
    throw std::runtime_error("no within-group comparable pairs for '" + label + "'");
  }
  return static_cast<double>(concordant) / static_cast<double>(pairs);
}

double expected_sub_c_index(const Cohort& cohort, const HazardAssignment& hazards,
                            const PredictionModel& model, const std::string& label) {
  const int level = cohort.level_of(label);
  if (level < 0) throw std::invalid_argument("unknown group label '" + label + "'");
  const auto order = time_order_checked(cohort);
  const Eigen::VectorXd pred = model.aligned(cohort);
  const Eigen::VectorXd h = hazards.aligned(cohort);
  const std::vector<int> group = cohort.group_index();

  std::int64_t pairs = 0;
  double credit = 0.0;
  for_each_comparable(cohort, order, [&](std::size_t i, std::size_t j) {
    const int touches = (group[i] == level ? 1 : 0) + (group[j] == level ? 1 : 0);
    if (touches == 0) return;
    const double gap = checked_prediction_gap(pred[static_cast<Eigen::Index>(i)],
                                              pred[static_cast<Eigen::Index>(j)]);
    const double hi = h[static_cast<Eigen::Index>(i)];
    const double hj = h[static_cast<Eigen::Index>(j)];
    pairs += touches;
    credit += touches * (gap > 0.0 ? hj / (hi + hj) : hi / (hi + hj));
  });
  if (pairs == 0) throw std::runtime_error("no comparable pairs for group '" + label + "'");
  return credit / static_cast<double>(pairs);
}

double discrimination_ratio(double ci, double eci) {
  if (!(eci > 0.5)) throw std::runtime_error("degenerate bound");
  return (ci - 0.5) / (eci - 0.5);
}

ConcordanceReport concordance_report(const Cohort& cohort,
                                     const PredictionModel& fitted_model,
                                     const HazardAssignment& star_hazards,
                                     const PredictionModel& star_model) {
  const auto order = time_order_checked(cohort);
  const Eigen::VectorXd pred_fit = fitted_model.aligned(cohort);
  const Eigen::VectorXd pred_star = star_model.aligned(cohort);
  const Eigen::VectorXd h = star_hazards.aligned(cohort);
  const std::vector<int> group = cohort.group_index();

  std::int64_t concordant = 0;
  double credit = 0.0;
  std::vector<GroupAccum> acc(cohort.group_levels.size());

  const std::int64_t pairs = for_each_comparable(
      cohort, order, [&](std::size_t i, std::size_t j) {
        const Eigen::Index ii = static_cast<Eigen::Index>(i);
        const Eigen::Index jj = static_cast<Eigen::Index>(j);
        const bool fit_win = checked_prediction_gap(pred_fit[ii], pred_fit[jj]) > 0.0;
        const bool star_win = checked_prediction_gap(pred_star[ii], pred_star[jj]) > 0.0;
        const double p_star = star_win ? h[jj] / (h[ii] + h[jj])
                                       : h[ii] / (h[ii] + h[jj]);
        concordant += fit_win ? 1 : 0;
        credit += p_star;

        for (const std::size_t member : {i, j}) {
          GroupAccum& g = acc[static_cast<std::size_t>(group[member])];
          ++g.pairs;
          g.concordant += fit_win ? 1 : 0;
          g.credit += p_star;
        }
        if (group[i] == group[j]) {
          GroupAccum& g = acc[static_cast<std::size_t>(group[i])];
          ++g.within_pairs;
          g.within_concordant += fit_win ? 1 : 0;
        }
      });
  if (pairs == 0) throw std::runtime_error("no comparable pairs");

  ConcordanceReport report;
  report.pair_count = pairs;
  report.ci = static_cast<double>(concordant) / static_cast<double>(pairs);
  report.eci = credit / static_cast<double>(pairs);
  report.dr = discrimination_ratio(report.ci, report.eci);
  for (std::size_t l = 0; l < acc.size(); ++l) {
    const GroupAccum& g = acc[l];
    if (g.pairs == 0) {
      throw std::runtime_error("no comparable pairs for group '" +
                               cohort.group_levels[l] + "'");
    }
    GroupReport gr;
    gr.label = cohort.group_levels[l];
    gr.pair_count = g.pairs;
    gr.subci = static_cast<double>(g.concordant) / static_cast<double>(g.pairs);
    gr.subeci = g.credit / static_cast<double>(g.pairs);
    gr.subdr = discrimination_ratio(gr.subci, gr.subeci);
    if (g.within_pairs > 0) {
      gr.within_subci = static_cast<double>(g.within_concordant) /
                        static_cast<double>(g.within_pairs);
    }
    report.per_group.push_back(std::move(gr));
  }
  return report;
}

}  // namespace survci
