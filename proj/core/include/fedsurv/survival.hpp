#pragma once

#include "fedsurv/types.hpp"

#include <Eigen/Core>

#include <vector>

namespace fedsurv {

struct LogRankResult {
  double chi_square = 0.0;
  int df = 0;
  double p_value = 1.0;
};

/// Kaplan-Meier product-limit estimator. At tied times events are
/// processed before censorings; censored-only times reduce the risk
/// set without creating a step.
StepSurvivalCurve kaplan_meier(const SurvivalDataset& data);

/// Kaplan-Meier estimate of the censoring distribution G(t): the event
/// indicator is flipped, so steps occur at censoring times.
StepSurvivalCurve censoring_kaplan_meier(const SurvivalDataset& data);

/// K-sample log-rank test with the hypergeometric variance and the
/// (n-d)/(n-1) correction; df = K - 1. Requires at least one event.
LogRankResult logrank_test(const std::vector<SurvivalDataset>& groups);

/// Breslow estimator of the cumulative baseline hazard at a fixed
/// coefficient vector.
CumulativeHazardCurve breslow_baseline_hazard(const SurvivalDataset& data,
                                              const Eigen::VectorXd& beta);

/// Export helper shared by both curve types: CSV rows
/// `time,survival,at_risk,events` (or cumulative hazard in place of
/// survival).
std::string curve_to_csv(const StepSurvivalCurve& curve);
std::string curve_to_csv(const CumulativeHazardCurve& curve);

}  // namespace fedsurv
