#pragma once

#include "fedsurv/rng.hpp"
#include "fedsurv/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace bench {

// Exponential survival with hazard multiplier exp(beta'x), 30% censoring.
inline fedsurv::SurvivalDataset make_data(int n, int p, uint64_t seed) {
  fedsurv::Rng rng(seed);
  Eigen::VectorXd beta(p);
  for (int k = 0; k < p; ++k) beta(k) = (k % 2 ? -0.3 : 0.4);
  std::vector<fedsurv::SurvivalRecord> records;
  records.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    fedsurv::SurvivalRecord r;
    r.covariates = Eigen::VectorXd(p);
    for (int k = 0; k < p; ++k) r.covariates(k) = rng.normal();
    const double t = rng.exponential(1.0) / std::exp(beta.dot(r.covariates));
    const double c = rng.exponential(0.4);
    r.time = std::min(t, c);
    r.event = t <= c ? 1 : 0;
    records.push_back(std::move(r));
  }
  std::vector<std::string> names;
  for (int k = 0; k < p; ++k) names.push_back("x" + std::to_string(k + 1));
  return fedsurv::SurvivalDataset(
      std::move(records), std::move(names),
      std::vector<fedsurv::VariableKind>(static_cast<size_t>(p),
                                         fedsurv::VariableKind::continuous));
}

}  // namespace bench
