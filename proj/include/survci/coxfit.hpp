#pragma once

#include <Eigen/Core>

#include "survci/baseline.hpp"
#include "survci/core.hpp"

namespace survci {

enum class TieMethod { breslow, efron };

struct CoxOptions {
  TieMethod tie_method = TieMethod::breslow;
  int max_iter = 100;
  double tolerance = 1e-9;  // relative log-likelihood change
  bool standardize = true;
};

struct CoxFit {
  Eigen::VectorXd coefficients;     // original covariate scale
  Eigen::VectorXd standard_errors;  // from the inverse observed information
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  TieMethod tie_method = TieMethod::breslow;
  Eigen::VectorXd center;  // standardization applied internally
  Eigen::VectorXd scale;
};

// Log partial likelihood at the given coefficients. Public so that an
// external grid search can certify fit_cox's maximizer.
double partial_loglik(const Cohort& cohort, const Eigen::VectorXd& coefficients,
                      TieMethod tie_method = TieMethod::breslow);

// Analytic score vector of the partial log-likelihood.
Eigen::VectorXd partial_loglik_gradient(const Cohort& cohort,
                                        const Eigen::VectorXd& coefficients,
                                        TieMethod tie_method = TieMethod::breslow);

// Newton-Raphson with step halving on standardized covariates. Convergence:
// relative log-likelihood change <= tolerance or score max-norm <= 1e-6.
// Throws "collinear predictors" when the information matrix is singular.
CoxFit fit_cox(const Cohort& cohort, const CoxOptions& options = {});

// rates[i] = exp(beta' z_i); requires a converged fit.
HazardAssignment predict_hazard_ratios(const CoxFit& fit, const Cohort& cohort);

// Predicted survival = restricted mean of S0^h; ordering reverses the hazard
// ordering.
PredictionModel model_from_hazards(const HazardAssignment& hazards,
                                   const BaselineSurvival& baseline);

}  // namespace survci
