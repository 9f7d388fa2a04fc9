#pragma once

#include "fedsurv/types.hpp"

#include <Eigen/Core>

#include <functional>

namespace fedsurv {

/// Result of a local Cox fit. `covariance` is the inverse observed
/// information of the 1/n-scaled log partial likelihood.
struct CoxFit {
  Eigen::VectorXd beta_hat;
  Eigen::MatrixXd covariance;
  double log_lik = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Value/gradient/Hessian bundle of a scaled log partial likelihood
/// (or of any objective handed to newton_maximize).
struct ObjectiveEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

/// 1/n-scaled log partial likelihood, Breslow tie handling. Risk-set
/// sums are rescaled by the running maximum linear predictor so large
/// coefficients cannot overflow.
double local_log_partial_likelihood(const SurvivalDataset& data, const Eigen::VectorXd& beta);

Eigen::VectorXd cox_gradient(const SurvivalDataset& data, const Eigen::VectorXd& beta);

Eigen::MatrixXd cox_hessian(const SurvivalDataset& data, const Eigen::VectorXd& beta);

/// All three in one descending-time sweep.
ObjectiveEval cox_derivatives(const SurvivalDataset& data, const Eigen::VectorXd& beta,
                              bool with_derivatives = true);

struct NewtonOptions {
  double gradient_tol = 1e-8;
  int max_iterations = 50;
  int max_halvings = 30;
  double separation_bound = 50.0;
  double pivot_tol = 1e-12;
};

struct NewtonResult {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;  // inverse of the negated Hessian at the optimum
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Newton-Raphson with step-halving on a concave objective. Throws
/// "singular information" when the Hessian solve fails, "monotone
/// likelihood / separation" when a coordinate escapes the separation
/// bound, and "max iterations" when the gradient tolerance is not met.
NewtonResult newton_maximize(
    const std::function<ObjectiveEval(const Eigen::VectorXd&, bool)>& objective,
    const Eigen::VectorXd& init, const NewtonOptions& options = {});

/// Local Cox model via newton_maximize, initialized at `init`
/// (zero by default).
CoxFit fit_cox(const SurvivalDataset& data);
CoxFit fit_cox(const SurvivalDataset& data, const Eigen::VectorXd& init,
               const NewtonOptions& options = {});

}  // namespace fedsurv
