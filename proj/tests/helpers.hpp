#pragma once

#include "fedsurv/rng.hpp"
#include "fedsurv/types.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace testutil {

inline fedsurv::SurvivalDataset make_dataset(const std::vector<double>& times,
                                             const std::vector<int>& events,
                                             const std::vector<std::vector<double>>& columns = {},
                                             std::vector<std::string> names = {}) {
  const size_t n = times.size();
  const size_t p = columns.size();
  if (names.empty()) {
    for (size_t k = 0; k < p; ++k) names.push_back("x" + std::to_string(k + 1));
  }
  std::vector<fedsurv::SurvivalRecord> records(n);
  for (size_t i = 0; i < n; ++i) {
    records[i].time = times[i];
    records[i].event = events[i];
    records[i].covariates = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    for (size_t k = 0; k < p; ++k) records[i].covariates(static_cast<Eigen::Index>(k)) = columns[k][i];
  }
  std::vector<fedsurv::VariableKind> kinds(p, fedsurv::VariableKind::continuous);
  return fedsurv::SurvivalDataset(std::move(records), std::move(names), std::move(kinds));
}

/// Random mixed-censoring dataset for property tests.
inline fedsurv::SurvivalDataset random_dataset(fedsurv::Rng& rng, int n, int p,
                                               double censor_prob = 0.3) {
  std::vector<double> times(static_cast<size_t>(n));
  std::vector<int> events(static_cast<size_t>(n));
  std::vector<std::vector<double>> cols(static_cast<size_t>(p),
                                        std::vector<double>(static_cast<size_t>(n)));
  int total_events = 0;
  for (int i = 0; i < n; ++i) {
    times[static_cast<size_t>(i)] = rng.exponential(0.2);
    events[static_cast<size_t>(i)] = rng.bernoulli(censor_prob) ? 0 : 1;
    total_events += events[static_cast<size_t>(i)];
    for (int k = 0; k < p; ++k) cols[static_cast<size_t>(k)][static_cast<size_t>(i)] = rng.normal();
  }
  if (total_events == 0) events[0] = 1;  // keep the likelihood nondegenerate
  return make_dataset(times, events, cols);
}

/// Central finite-difference gradient of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd hi = x, lo = x;
    hi(k) += h;
    lo(k) -= h;
    g(k) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

/// Five-point central difference, error O(h^4); used where 1e-8
/// agreement must be resolvable.
inline Eigen::VectorXd fd_gradient5(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x, double h = 1e-3) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd x1 = x, x2 = x, x3 = x, x4 = x;
    x1(k) -= 2.0 * h;
    x2(k) -= h;
    x3(k) += h;
    x4(k) += 2.0 * h;
    g(k) = (f(x1) - 8.0 * f(x2) + 8.0 * f(x3) - f(x4)) / (12.0 * h);
  }
  return g;
}

/// Finite-difference Jacobian of a vector function (rows = components).
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-5) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd hi = x, lo = x;
    hi(k) += h;
    lo(k) -= h;
    j.col(k) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return j;
}

inline Eigen::MatrixXd fd_jacobian5(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-3) {
  Eigen::MatrixXd j(f(x).size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd x1 = x, x2 = x, x3 = x, x4 = x;
    x1(k) -= 2.0 * h;
    x2(k) -= h;
    x3(k) += h;
    x4(k) += 2.0 * h;
    j.col(k) = (f(x1) - 8.0 * f(x2) + 8.0 * f(x3) - f(x4)) / (12.0 * h);
  }
  return j;
}

/// Grid scan followed by golden-section refinement; an optimizer that
/// touches only function values, independent of any gradient code.
inline double grid_maximize_1d(const std::function<double(double)>& f, double lo, double hi,
                               double tol = 1e-10) {
  const int grid = 2000;
  double best_x = lo, best_v = f(lo);
  for (int i = 1; i <= grid; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / grid;
    const double v = f(x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - (hi - lo) / grid);
  double b = std::min(hi, best_x + (hi - lo) / grid);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace testutil
