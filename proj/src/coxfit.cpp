#include "survci/coxfit.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace survci {

namespace {

struct SortedData {
  Eigen::MatrixXd z;        // time-ascending rows
  Eigen::VectorXd times;
  std::vector<char> event;
  std::size_t events = 0;
};

SortedData sort_cohort(const Cohort& cohort) {
  std::vector<std::size_t> order(cohort.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cohort.records[a].observed_time < cohort.records[b].observed_time;
  });
  SortedData d;
  d.z.resize(static_cast<Eigen::Index>(cohort.size()), cohort.covariate_dim());
  d.times.resize(static_cast<Eigen::Index>(cohort.size()));
  d.event.resize(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& rec = cohort.records[order[i]];
    d.z.row(static_cast<Eigen::Index>(i)) = rec.covariates.transpose();
    d.times[static_cast<Eigen::Index>(i)] = rec.observed_time;
    d.event[i] = rec.event ? 1 : 0;
    d.events += rec.event ? 1 : 0;
  }
  return d;
}

struct LikelihoodParts {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;  // negative Hessian
};

// One pass over time blocks, descending, maintaining risk-set sums
//   S0 = sum w, S1 = sum w z, S2 = sum w z z'
// with w = exp(eta - eta_max). Breslow uses the block sums directly, Efron
// peels the tied deaths out in d fractional steps.
LikelihoodParts likelihood_parts(const SortedData& d, const Eigen::VectorXd& beta,
                                 TieMethod tie, bool with_derivatives) {
  const Eigen::Index m = d.times.size();
  const Eigen::Index p = d.z.cols();
  const Eigen::VectorXd eta = d.z * beta;
  const double eta_max = eta.maxCoeff();
  const Eigen::VectorXd w = (eta.array() - eta_max).exp().matrix();

  LikelihoodParts parts;
  if (with_derivatives) {
    parts.score = Eigen::VectorXd::Zero(p);
    parts.information = Eigen::MatrixXd::Zero(p, p);
  }

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

  Eigen::Index hi = m;  // (lo, hi] is the risk set already accumulated
  while (hi > 0) {
    Eigen::Index lo = hi;
    const double t = d.times[hi - 1];
    while (lo > 0 && d.times[lo - 1] == t) --lo;

    double d0 = 0.0;  // tied-death sums within the block
    Eigen::VectorXd d1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(p, p);
    double sum_eta_deaths = 0.0;
    Eigen::VectorXd sum_z_deaths = Eigen::VectorXd::Zero(p);
    int deaths = 0;

    for (Eigen::Index i = lo; i < hi; ++i) {
      s0 += w[i];
      s1.noalias() += w[i] * d.z.row(i).transpose();
      if (with_derivatives) {
        s2.noalias() += w[i] * d.z.row(i).transpose() * d.z.row(i);
      }
      if (d.event[static_cast<std::size_t>(i)]) {
        ++deaths;
        sum_eta_deaths += eta[i];
        sum_z_deaths += d.z.row(i).transpose();
        if (tie == TieMethod::efron) {
          d0 += w[i];
          d1.noalias() += w[i] * d.z.row(i).transpose();
          if (with_derivatives) {
            d2.noalias() += w[i] * d.z.row(i).transpose() * d.z.row(i);
          }
        }
      }
    }

    if (deaths > 0) {
      parts.loglik += sum_eta_deaths;
      if (with_derivatives) parts.score += sum_z_deaths;
      const int steps = tie == TieMethod::efron ? deaths : 1;
      for (int r = 0; r < steps; ++r) {
        const double frac = tie == TieMethod::efron
                                ? static_cast<double>(r) / deaths
                                : 0.0;
        const double denom = s0 - frac * d0;
        const double weight = tie == TieMethod::efron ? 1.0 : deaths;
        parts.loglik -= weight * (std::log(denom) + eta_max);
        if (with_derivatives) {
          const Eigen::VectorXd mean = (s1 - frac * d1) / denom;
          parts.score.noalias() -= weight * mean;
          parts.information.noalias() +=
              weight * ((s2 - frac * d2) / denom - mean * mean.transpose());
        }
      }
    }
    hi = lo;
  }
  return parts;
}

void require_events(const SortedData& d) {
  if (d.events == 0) throw std::runtime_error("no events");
}

}  // namespace

double partial_loglik(const Cohort& cohort, const Eigen::VectorXd& coefficients,
                      TieMethod tie_method) {
  if (coefficients.size() != cohort.covariate_dim()) {
    throw std::invalid_argument("coefficient length does not match covariate dimension");
  }
  const SortedData d = sort_cohort(cohort);
  require_events(d);
  return likelihood_parts(d, coefficients, tie_method, false).loglik;
}

Eigen::VectorXd partial_loglik_gradient(const Cohort& cohort,
                                        const Eigen::VectorXd& coefficients,
                                        TieMethod tie_method) {
  if (coefficients.size() != cohort.covariate_dim()) {
    throw std::invalid_argument("coefficient length does not match covariate dimension");
  }
  const SortedData d = sort_cohort(cohort);
  require_events(d);
  return likelihood_parts(d, coefficients, tie_method, true).score;
}

CoxFit fit_cox(const Cohort& cohort, const CoxOptions& options) {
  SortedData d = sort_cohort(cohort);
  if (d.events < 2) throw std::invalid_argument("need at least 2 events");
  const Eigen::Index p = d.z.cols();
  if (p == 0) throw std::invalid_argument("no covariates to fit");

  CoxFit fit;
  fit.tie_method = options.tie_method;
  fit.center = Eigen::VectorXd::Zero(p);
  fit.scale = Eigen::VectorXd::Ones(p);
  if (options.standardize) {
    const Eigen::Index m = d.z.rows();
    fit.center = d.z.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
      const double sd = std::sqrt(
          (d.z.col(j).array() - fit.center[j]).square().sum() / (m - 1));
      if (!(sd > 0.0)) throw std::runtime_error("collinear predictors");
      fit.scale[j] = sd;
      d.z.col(j) = (d.z.col(j).array() - fit.center[j]) / sd;
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  LikelihoodParts parts = likelihood_parts(d, beta, options.tie_method, true);
  fit.converged = parts.score.cwiseAbs().maxCoeff() <= 1e-6;

  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  int iter = 0;
  while (!fit.converged && iter < options.max_iter) {
    ++iter;
    ldlt.compute(parts.information);
    const Eigen::ArrayXd diag = ldlt.vectorD().array();
    if (!(diag.minCoeff() > 1e-12 * std::max(1.0, diag.maxCoeff()))) {
      throw std::runtime_error("collinear predictors");
    }
    const Eigen::VectorXd direction = ldlt.solve(parts.score);

    // Step halving keeps the likelihood path non-decreasing.
    double step = 1.0;
    LikelihoodParts next;
    Eigen::VectorXd candidate;
    bool improved = false;
    for (int half = 0; half < 30; ++half) {
      candidate = beta + step * direction;
      next = likelihood_parts(d, candidate, options.tie_method, true);
      if (std::isfinite(next.loglik) && next.loglik >= parts.loglik) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;  // score will decide convergence below

    const double change = next.loglik - parts.loglik;
    beta = candidate;
    parts = next;
    if (parts.score.cwiseAbs().maxCoeff() <= 1e-6 ||
        change <= options.tolerance * (std::abs(parts.loglik) + 1.0)) {
      fit.converged = true;
    }
  }
  fit.iterations = iter;
  fit.log_likelihood = parts.loglik;

  ldlt.compute(parts.information);
  const Eigen::ArrayXd diag = ldlt.vectorD().array();
  if (!(diag.minCoeff() > 1e-12 * std::max(1.0, diag.maxCoeff()))) {
    throw std::runtime_error("collinear predictors");
  }
  const Eigen::MatrixXd covariance =
      ldlt.solve(Eigen::MatrixXd::Identity(p, p));

  fit.coefficients = (beta.array() / fit.scale.array()).matrix();
  fit.standard_errors =
      (covariance.diagonal().array().sqrt() / fit.scale.array()).matrix();
  return fit;
}

HazardAssignment predict_hazard_ratios(const CoxFit& fit, const Cohort& cohort) {
  if (!fit.converged) throw std::runtime_error("Cox fit did not converge");
  if (fit.coefficients.size() != cohort.covariate_dim()) {
    throw std::invalid_argument("fit dimension does not match cohort");
  }
  HazardAssignment out;
  out.provenance = HazardProvenance::model_fitted;
  for (const auto& rec : cohort.records) {
    out.rates[rec.id] = std::exp(fit.coefficients.dot(rec.covariates));
  }
  return out;
}

PredictionModel model_from_hazards(const HazardAssignment& hazards,
                                   const BaselineSurvival& baseline) {
  PredictionModel model;
  for (const auto& [id, rate] : hazards.rates) {
    if (!(rate > 0.0) || !std::isfinite(rate)) {
      throw std::invalid_argument("hazard rate must be positive and finite");
    }
    model.predicted_survival[id] = baseline.restricted_mean(rate);
  }
  return model;
}

}  // namespace survci
