#include "fedsurv/cox.hpp"

#include "fedsurv/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fedsurv {

ObjectiveEval cox_derivatives(const SurvivalDataset& data, const Eigen::VectorXd& beta,
                              bool with_derivatives) {
  const int n = data.n();
  const int p = data.p();
  if (beta.size() != p) throw std::invalid_argument("cox_derivatives: beta length mismatch");

  std::vector<double> eta(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) eta[static_cast<size_t>(i)] = beta.dot(data.record(i).covariates);

  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return data.record(a).time > data.record(b).time;
  });

  // Running risk-set sums, stored relative to the running maximum linear
  // predictor `shift`; the descending-time sweep only ever adds members.
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  double shift = -std::numeric_limits<double>::infinity();

  ObjectiveEval out;
  out.value = 0.0;
  if (with_derivatives) {
    out.grad = Eigen::VectorXd::Zero(p);
    out.hess = Eigen::MatrixXd::Zero(p, p);
  }

  size_t i = 0;
  while (i < idx.size()) {
    const double t = data.record(idx[i]).time;
    const size_t group_begin = i;
    while (i < idx.size() && data.record(idx[i]).time == t) {
      const int r = idx[i];
      const double e = eta[static_cast<size_t>(r)];
      const auto& x = data.record(r).covariates;
      if (e > shift) {
        const double scale = std::isfinite(shift) ? std::exp(shift - e) : 0.0;
        s0 = s0 * scale + 1.0;
        if (with_derivatives) {
          s1 = s1 * scale + x;
          s2 = s2 * scale + x * x.transpose();
        }
        shift = e;
      } else {
        const double w = std::exp(e - shift);
        s0 += w;
        if (with_derivatives) {
          s1 += w * x;
          s2 += w * x * x.transpose();
        }
      }
      ++i;
    }
    const double log_denom = shift + std::log(s0);
    for (size_t j = group_begin; j < i; ++j) {
      const int r = idx[j];
      if (data.record(r).event != 1) continue;
      out.value += eta[static_cast<size_t>(r)] - log_denom;
      if (with_derivatives) {
        const Eigen::VectorXd mean = s1 / s0;
        out.grad += data.record(r).covariates - mean;
        out.hess -= s2 / s0 - mean * mean.transpose();
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  out.value *= inv_n;
  if (with_derivatives) {
    out.grad *= inv_n;
    out.hess *= inv_n;
  }
  return out;
}

double local_log_partial_likelihood(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  return cox_derivatives(data, beta, false).value;
}

Eigen::VectorXd cox_gradient(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  return cox_derivatives(data, beta).grad;
}

Eigen::MatrixXd cox_hessian(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  return cox_derivatives(data, beta).hess;
}

NewtonResult newton_maximize(
    const std::function<ObjectiveEval(const Eigen::VectorXd&, bool)>& objective,
    const Eigen::VectorXd& init, const NewtonOptions& options) {
  Eigen::VectorXd beta = init;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    ObjectiveEval eval = objective(beta, true);
    if (eval.grad.cwiseAbs().maxCoeff() < options.gradient_tol) {
      auto cov = spd_inverse(-eval.hess, options.pivot_tol);
      if (!cov) throw std::runtime_error("singular information");
      // A coefficient whose standard error exceeds the separation bound
      // is statistically unbounded: the likelihood is flat enough for
      // the gradient test to pass while the optimum sits at infinity.
      if (cov->diagonal().maxCoeff() > options.separation_bound * options.separation_bound)
        throw std::runtime_error("monotone likelihood / separation");
      NewtonResult result;
      result.beta = beta;
      result.covariance = *cov;
      result.value = eval.value;
      result.iterations = iter;
      result.converged = true;
      return result;
    }

    auto step = spd_solve(-eval.hess, eval.grad, options.pivot_tol);
    if (!step) throw std::runtime_error("singular information");

    Eigen::VectorXd candidate = beta + *step;
    double candidate_value = objective(candidate, false).value;
    for (int h = 0; h < options.max_halvings; ++h) {
      if (std::isfinite(candidate_value) && candidate_value >= eval.value) break;
      *step *= 0.5;
      candidate = beta + *step;
      candidate_value = objective(candidate, false).value;
    }
    beta = candidate;

    if (beta.cwiseAbs().maxCoeff() > options.separation_bound)
      throw std::runtime_error("monotone likelihood / separation");
  }
  throw std::runtime_error("max iterations");
}

CoxFit fit_cox(const SurvivalDataset& data) {
  return fit_cox(data, Eigen::VectorXd::Zero(data.p()));
}

CoxFit fit_cox(const SurvivalDataset& data, const Eigen::VectorXd& init,
               const NewtonOptions& options) {
  if (data.p() < 1) throw std::invalid_argument("fit_cox: no covariates");
  if (data.event_count() < 1) throw std::invalid_argument("fit_cox: dataset has no events");

  auto objective = [&data](const Eigen::VectorXd& b, bool derivs) {
    return cox_derivatives(data, b, derivs);
  };
  NewtonResult r = newton_maximize(objective, init, options);

  CoxFit fit;
  fit.beta_hat = r.beta;
  fit.covariance = r.covariance;
  fit.log_lik = r.value;
  fit.iterations = r.iterations;
  fit.converged = r.converged;
  return fit;
}

}  // namespace fedsurv
