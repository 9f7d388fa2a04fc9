#pragma once

#include "fedsurv/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace fedsurv {

/// Normalized site weights, sum 1. Default construction is from sample
/// sizes (w_j = S_j / S_0); custom weights are normalized on entry.
class SiteWeights {
 public:
  explicit SiteWeights(std::vector<double> weights);
  static SiteWeights from_sample_sizes(const std::vector<int>& sizes);

  const std::vector<double>& weights() const { return weights_; }
  double weight(int j) const { return weights_[static_cast<size_t>(j)]; }
  int size() const { return static_cast<int>(weights_.size()); }

 private:
  std::vector<double> weights_;
};

/// Per-site variable importance and the induced ranks (1 = most
/// important; ranks form a permutation of 1..P).
struct VariableRanking {
  int site_id = 0;
  std::vector<std::string> variable_names;
  Eigen::VectorXd importance;
  std::vector<int> ranks;
};

struct CollinearPair {
  int first = 0;
  int second = 0;
  double r = 0.0;
};

/// Flagged variable pairs (|Pearson r| > threshold, sorted by |r|
/// descending) plus indices of zero-variance variables.
struct CollinearityReport {
  std::vector<CollinearPair> pairs;
  std::vector<int> degenerate;
};

CollinearityReport multicollinearity_screen(const SurvivalDataset& data, double threshold = 0.8);

struct RsfConfig {
  int n_trees = 500;
  int mtry = 0;  // 0 means ceil(sqrt(p))
  int min_node_events = 3;
  int min_node_size = 15;
  int max_cutpoints = 32;
  uint64_t seed = 0;
};

/// Random survival forest permutation importance. Trees are grown on
/// bootstrap samples with log-rank splitting; VIMP is the increase in
/// out-of-bag error (1 - Harrell's C on ensemble mortality) when a
/// variable's out-of-bag values are permuted within each tree.
/// Bootstrap draws are taken against a canonical record ordering, so
/// shuffling the input rows does not change the result.
VariableRanking rsf_importance(const SurvivalDataset& data, const RsfConfig& config);

/// Weighted aggregation of local ranks: variables ordered by ascending
/// sum of w_j * rank_j, mapped onto 1..P. Ties prefer the variable with
/// the better rank at the highest-weight site (lowest site index on
/// weight ties), then ingestion order.
std::vector<int> aggregate_ranks(const std::vector<VariableRanking>& local,
                                 const SiteWeights& weights);

/// CSV rows `variable,vimp,rank`.
std::string ranking_to_csv(const VariableRanking& ranking);

}  // namespace fedsurv
