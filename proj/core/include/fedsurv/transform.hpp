#pragma once

#include "fedsurv/cox.hpp"
#include "fedsurv/ranking.hpp"
#include "fedsurv/types.hpp"

#include <string>
#include <vector>

namespace fedsurv {

/// Per-site quantile cutoffs for one continuous variable. `raw` holds
/// one value per requested percentile; `cutoffs` is the deduplicated
/// strictly increasing sequence actually usable for binning.
struct LocalCutoffs {
  std::vector<double> raw;
  std::vector<double> cutoffs;
  bool degenerate = false;  // constant column: no usable cutoffs
};

/// Nearest-rank quantiles (order statistic ceil(q*n/100)) at the given
/// percentiles.
LocalCutoffs local_quantile_cutoffs(const SurvivalDataset& data, int variable,
                                    const std::vector<double>& percentiles = {20, 40, 60, 80});

/// Position-wise weighted average of per-site raw cutoffs, then
/// deduplicated. Sites with an empty vector (degenerate variables)
/// do not contribute; weights renormalize over contributors. Returns
/// empty when no site contributes.
std::vector<double> unify_cutoffs(const std::vector<std::vector<double>>& site_raw_cutoffs,
                                  const SiteWeights& weights);

/// Per-variable binning rule: interval cutoffs for continuous
/// variables, the level set for categorical ones (reference = lowest).
struct CutoffScheme {
  struct Entry {
    std::string variable;
    VariableKind kind = VariableKind::continuous;
    std::vector<double> cutoffs;  // continuous: strictly increasing
    std::vector<double> levels;   // categorical: sorted distinct values
  };
  std::vector<Entry> entries;

  const Entry* find(const std::string& variable) const;
  /// CSV rows `variable,position,cutoff` (levels for categorical entries).
  std::string to_csv() const;
};

/// Scheme covering every variable of `data`: unified cutoffs must be
/// supplied per continuous variable (empty list = single interval);
/// categorical level sets are read off the data.
CutoffScheme build_scheme(const SurvivalDataset& data,
                          const std::vector<std::vector<double>>& continuous_cutoffs);

/// The dummy-coded design a scheme induces on a dataset. Intervals are
/// left-closed: (-inf,c1), [c1,c2), ..., [c_last,inf); the lowest
/// interval (or level) is the reference and carries no dummy column.
struct CategoricalDesign {
  struct VariableLayout {
    std::string name;
    VariableKind kind = VariableKind::continuous;
    std::vector<std::string> labels;       // one per category
    std::vector<double> cutoffs_or_levels;
    int n_categories = 0;
    int first_dummy_column = -1;           // -1 when single-category
  };
  std::vector<VariableLayout> variables;
  Eigen::MatrixXi category;  // n x #variables, 0-based category index
  SurvivalDataset encoded;   // dummy columns, same times/events/sites

  int dummy_columns() const { return encoded.p(); }
};

CategoricalDesign categorize(const SurvivalDataset& data, const CutoffScheme& scheme);

/// Category index of a single value under a scheme entry.
int category_of(double value, const CutoffScheme::Entry& entry);

/// One merge pass: adjacent intervals of continuous variables whose
/// fitted log-hazard coefficients (reference = 0) differ by less than
/// epsilon are merged. Comparisons use the original coefficients, so a
/// single invocation never chains beyond one pass. Refitting on the
/// returned scheme is the caller's responsibility.
CutoffScheme merge_similar_categories(const CategoricalDesign& design, const CoxFit& fit,
                                      double epsilon = 0.1);

}  // namespace fedsurv
