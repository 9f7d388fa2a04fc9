#pragma once

#include "fedsurv/evaluation.hpp"
#include "fedsurv/odach.hpp"
#include "fedsurv/ranking.hpp"
#include "fedsurv/scoring.hpp"
#include "fedsurv/transform.hpp"
#include "fedsurv/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fedsurv {

/// One synthetic covariate: a site-shifted normal for continuous
/// variables, a low-prevalence flag for binary ones, plus its true
/// log-hazard effect.
struct CovariateSpec {
  std::string name;
  VariableKind kind = VariableKind::continuous;
  double mean = 0.0;
  double sd = 1.0;
  double prevalence = 0.1;
  double beta = 0.0;
  std::vector<double> site_shift;  // per-site additive shift (mean or prevalence); empty = none
};

/// Heterogeneous multi-site generator: per-site Weibull baselines with
/// an exp(beta'x) hazard multiplier, exponential censoring calibrated
/// by bisection to the target censored fraction, administrative cutoff
/// at t_max.
struct GeneratorConfig {
  std::vector<int> site_sizes;
  std::vector<CovariateSpec> covariates;
  std::vector<double> weibull_shape;  // per site
  std::vector<double> weibull_scale;  // per site
  double censoring_target = 0.7;
  double t_max = 30.0;
  uint64_t seed = 0;

  int n_sites() const { return static_cast<int>(site_sizes.size()); }
  Eigen::VectorXd true_beta() const;
  void validate() const;

  /// The 6-site benchmark: two equal mid-size sites plus four sites in
  /// a 10/20/30/40 split of a larger pool, distinct baseline hazards,
  /// clinical-style vitals and comorbidity flags.
  static GeneratorConfig default_benchmark();
};

std::vector<SurvivalDataset> generate_sites(const GeneratorConfig& config);

struct TrainTestSplit {
  SurvivalDataset train;
  SurvivalDataset test;
};

/// Event-stratified split; test_fraction of events and of censored
/// records go to the test side.
TrainTestSplit split_train_test(const SurvivalDataset& data, double test_fraction, uint64_t seed);

/// A simulated participant: private train/test data and its weight.
/// Only odach messages ever leave a site; the datasets stay put.
struct SiteHandle {
  int site_id = 0;
  SurvivalDataset train;
  SurvivalDataset test;
  double weight = 0.0;
};

struct PipelineConfig {
  std::vector<double> percentiles = {20, 40, 60, 80};
  double merge_epsilon = 0.1;
  long long s_max = 100;
  int max_variables = 10;  // D
  double delta = 0.01;
  int cv_folds = 5;
  int n_bootstrap = 200;
  double ci_level = 0.95;
  double test_fraction = 0.4;
  double collinearity_threshold = 0.8;
  RsfConfig rsf;
  std::vector<double> custom_weights;  // empty = sample-size weights
  uint64_t seed = 0;
};

/// A fully derived scoring model plus everything produced on the way.
struct FittedModel {
  std::vector<VariableRanking> local_rankings;
  std::vector<int> global_ranks;
  std::vector<CollinearityReport> collinearity;
  ParsimonyCurve parsimony;
  ModelSelection selection;
  CutoffScheme scheme;
  FederatedFit fed;
  ScoringTable table;
  std::vector<std::string> warnings;
};

/// Result of one transform + odach + scoring derivation on fixed
/// training sets (used for parsimony refits and the final model).
struct DerivedScore {
  CutoffScheme scheme;
  CategoricalDesign design;  // layout shared by every site
  FederatedFit fed;
  ScoringTable table;
  std::vector<std::string> dropped_variables;
};

/// Unified cutoffs -> shared categorical design -> one-shot federated
/// Cox -> one merge pass (refit when it changes the scheme) -> integer
/// scoring table.
DerivedScore derive_score_model(const std::vector<const SurvivalDataset*>& train_sites,
                                const SiteWeights& weights, const PipelineConfig& config);

/// The five-module flow on given training sites: rank, transform +
/// derive under cross-validated parsimony, select, refit.
FittedModel fit_pipeline(const std::vector<const SurvivalDataset*>& train_sites,
                         const SiteWeights& weights, const PipelineConfig& config);

struct ExperimentResult {
  std::vector<SiteHandle> sites;
  FittedModel federated;
  std::vector<EvaluationReport> federated_reports;  // on each site's test set
  std::vector<FittedModel> locals;                  // single-site baselines
  std::vector<EvaluationReport> local_reports;
  std::vector<double> evaluation_grid;
};

/// Full comparison run: the federated pipeline across all sites plus
/// the K=1 baseline per site, each evaluated on the site test sets.
ExperimentResult run_experiment(const GeneratorConfig& generator, const PipelineConfig& config);

}  // namespace fedsurv
