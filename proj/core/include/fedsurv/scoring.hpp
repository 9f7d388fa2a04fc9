#pragma once

#include "fedsurv/transform.hpp"
#include "fedsurv/types.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace fedsurv {

/// Integer scoring table: per variable, one row per interval (or
/// level), each variable's minimum is 0, and the maximum achievable
/// total is bounded by s_max.
struct ScoringTable {
  struct Variable {
    std::string name;
    VariableKind kind = VariableKind::continuous;
    std::vector<double> cutoffs_or_levels;
    std::vector<std::string> labels;
    std::vector<long long> points;  // one per category
  };
  std::vector<Variable> variables;
  long long s_max = 100;
  double scale = 0.0;
  std::string source;

  long long max_total() const;
  /// CSV rows `variable,interval,points` (interval labels are quoted
  /// since they contain commas).
  std::string to_csv() const;
  /// Human-readable aligned table.
  std::string to_text() const;
};

/// Turn fitted log-hazard coefficients on a categorical design into
/// integer points: per variable, shift so the minimum category
/// (including the reference's implicit 0) is 0, scale so the maximum
/// achievable total is s_max, round half away from zero.
ScoringTable derive_scores(const CategoricalDesign& design, const Eigen::VectorXd& beta,
                           long long s_max = 100, std::string source = "");

/// Total points for one subject's raw covariates. Every table variable
/// must be present among `names`.
long long score_subject(const ScoringTable& table, const std::vector<std::string>& names,
                        const Eigen::VectorXd& values);
long long score_subject(const ScoringTable& table, const SurvivalDataset& data, int row);

/// Integer scores for every record, as a vector usable as risk scores.
Eigen::VectorXd score_dataset(const ScoringTable& table, const SurvivalDataset& data);

}  // namespace fedsurv
