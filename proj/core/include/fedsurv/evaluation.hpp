#pragma once

#include "fedsurv/ranking.hpp"
#include "fedsurv/scoring.hpp"
#include "fedsurv/types.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fedsurv {

/// Cumulative/dynamic AUC at horizon t with inverse-probability-of-
/// censoring weights from the Kaplan-Meier estimate of the censoring
/// distribution. Cases: event by t; controls: still observed beyond t.
/// Score ties count one half. Returns nullopt when either side is
/// empty (a gap in the curve).
std::optional<double> auc_at_time(const Eigen::VectorXd& scores, const SurvivalDataset& data,
                                  double t);

/// Event-distribution-weighted integral of AUC(t): weights are the
/// Kaplan-Meier increments of 1 - S(t) on the grid; undefined grid
/// points are skipped with weight renormalization. Default grid:
/// unique event times of `data`.
double integrated_auc(const Eigen::VectorXd& scores, const SurvivalDataset& data);
double integrated_auc(const Eigen::VectorXd& scores, const SurvivalDataset& data,
                      const std::vector<double>& grid);

using Metric =
    std::function<std::optional<double>(const Eigen::VectorXd&, const SurvivalDataset&)>;

/// Subject-level percentile bootstrap interval; deterministic given
/// the seed. Throws "unstable metric" when the metric is undefined on
/// more than half the resamples.
std::pair<double, double> bootstrap_ci(const Eigen::VectorXd& scores, const SurvivalDataset& data,
                                       const Metric& metric, int n_boot = 200,
                                       double level = 0.95, uint64_t seed = 0);

struct AucPoint {
  double t = 0.0;
  double auc = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct EvaluationReport {
  std::vector<AucPoint> auc_t;
  double iauc = 0.0;
  double iauc_ci_low = 0.0;
  double iauc_ci_high = 0.0;
  int n_bootstrap = 0;
  std::vector<double> grid;

  double mean_ci_width() const;
  /// CSV rows `t,auc,ci_low,ci_high`.
  std::string to_csv() const;
};

struct EvaluateOptions {
  int n_bootstrap = 200;
  double level = 0.95;
  uint64_t seed = 0;
};

/// AUC(t) curve over `t_grid` with bootstrap bands plus iAUC with its
/// interval, all from one set of resamples.
EvaluationReport evaluate_scores(const Eigen::VectorXd& scores, const SurvivalDataset& data,
                                 const std::vector<double>& t_grid,
                                 const EvaluateOptions& options = {});

struct ParsimonyCurve {
  struct Point {
    int m = 0;
    std::vector<std::string> variables;  // top-m by global rank
    std::vector<double> phi;             // per-site mean validation iAUC
    double psi = 0.0;
  };
  std::vector<Point> points;
  std::vector<std::string> warnings;

  /// CSV rows `m,added_variable,psi,phi_site...`.
  std::string to_csv() const;
};

struct ParsimonyOptions {
  int cv_folds = 5;
  uint64_t seed = 0;
};

/// Fits a scoring model on fold-training data restricted to the top-m
/// variables; supplied by the caller (the federated derivation in the
/// pipeline, the single-site one for local baselines).
using ModelFitter = std::function<ScoringTable(const std::vector<const SurvivalDataset*>&)>;

/// Cross-validated parsimony curve: for m = 1..P, phi_j(m) is site j's
/// mean validation-fold iAUC of the refitted top-m model and
/// Psi_m = sum_j w_j phi_j(m). Folds where the refit or evaluation
/// fails are skipped with a warning; an m where every fold fails is an
/// error.
ParsimonyCurve parsimony_curve(const std::vector<int>& global_ranks,
                               const std::vector<const SurvivalDataset*>& sites,
                               const SiteWeights& weights, const ModelFitter& fit_model,
                               const ParsimonyOptions& options = {});

struct ModelSelection {
  int d = 0;
  std::vector<std::string> variables;
};

/// Smallest m <= D whose Psi is within delta of the best Psi over
/// m' <= D.
ModelSelection select_model(const ParsimonyCurve& curve, int max_variables = 10,
                            double delta = 0.01);

}  // namespace fedsurv
