#include "fedsurv/transform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace fedsurv {

namespace {

std::string format_value(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::vector<std::string> interval_labels(const std::vector<double>& cutoffs) {
  if (cutoffs.empty()) return {"all"};
  std::vector<std::string> labels;
  labels.push_back("<" + format_value(cutoffs.front()));
  for (size_t i = 0; i + 1 < cutoffs.size(); ++i)
    labels.push_back("[" + format_value(cutoffs[i]) + "," + format_value(cutoffs[i + 1]) + ")");
  labels.push_back(">=" + format_value(cutoffs.back()));
  return labels;
}

}  // namespace

LocalCutoffs local_quantile_cutoffs(const SurvivalDataset& data, int variable,
                                    const std::vector<double>& percentiles) {
  if (variable < 0 || variable >= data.p())
    throw std::invalid_argument("local_quantile_cutoffs: variable index out of range");
  if (data.variable_kinds()[static_cast<size_t>(variable)] != VariableKind::continuous)
    throw std::invalid_argument("local_quantile_cutoffs: variable is not continuous");
  for (size_t i = 0; i < percentiles.size(); ++i) {
    if (!(percentiles[i] > 0.0 && percentiles[i] < 100.0))
      throw std::invalid_argument("local_quantile_cutoffs: percentiles must lie in (0,100)");
    if (i > 0 && percentiles[i] <= percentiles[i - 1])
      throw std::invalid_argument("local_quantile_cutoffs: percentiles must be increasing");
  }
  const int n = data.n();
  if (n < static_cast<int>(percentiles.size()) + 1)
    throw std::invalid_argument("local_quantile_cutoffs: fewer records than categories");

  Eigen::VectorXd col = data.column(variable);
  std::vector<double> sorted(col.data(), col.data() + col.size());
  std::sort(sorted.begin(), sorted.end());

  LocalCutoffs out;
  if (sorted.front() == sorted.back()) {
    out.degenerate = true;
    return out;
  }
  for (double q : percentiles) {
    int rank = static_cast<int>(std::ceil(q * n / 100.0));
    rank = std::clamp(rank, 1, n);
    out.raw.push_back(sorted[static_cast<size_t>(rank - 1)]);
  }
  out.cutoffs = out.raw;
  out.cutoffs.erase(std::unique(out.cutoffs.begin(), out.cutoffs.end()), out.cutoffs.end());
  return out;
}

std::vector<double> unify_cutoffs(const std::vector<std::vector<double>>& site_raw_cutoffs,
                                  const SiteWeights& weights) {
  if (static_cast<int>(site_raw_cutoffs.size()) != weights.size())
    throw std::invalid_argument("unify_cutoffs: site count mismatch");

  size_t positions = 0;
  double weight_total = 0.0;
  for (size_t j = 0; j < site_raw_cutoffs.size(); ++j) {
    if (site_raw_cutoffs[j].empty()) continue;
    if (positions == 0) positions = site_raw_cutoffs[j].size();
    if (site_raw_cutoffs[j].size() != positions)
      throw std::invalid_argument("unify_cutoffs: sites disagree on cutoff count");
    weight_total += weights.weight(static_cast<int>(j));
  }
  if (positions == 0 || weight_total <= 0.0) return {};

  std::vector<double> unified(positions, 0.0);
  for (size_t j = 0; j < site_raw_cutoffs.size(); ++j) {
    if (site_raw_cutoffs[j].empty()) continue;
    const double w = weights.weight(static_cast<int>(j)) / weight_total;
    for (size_t i = 0; i < positions; ++i) unified[i] += w * site_raw_cutoffs[j][i];
  }
  std::sort(unified.begin(), unified.end());
  unified.erase(std::unique(unified.begin(), unified.end()), unified.end());
  return unified;
}

const CutoffScheme::Entry* CutoffScheme::find(const std::string& variable) const {
  for (const auto& e : entries) {
    if (e.variable == variable) return &e;
  }
  return nullptr;
}

std::string CutoffScheme::to_csv() const {
  std::string out = "variable,position,cutoff\n";
  for (const auto& e : entries) {
    const auto& values = e.kind == VariableKind::continuous ? e.cutoffs : e.levels;
    for (size_t i = 0; i < values.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.12g", values[i]);
      out += e.variable + "," + std::to_string(i + 1) + "," + buf + "\n";
    }
  }
  return out;
}

CutoffScheme build_scheme(const SurvivalDataset& data,
                          const std::vector<std::vector<double>>& continuous_cutoffs) {
  CutoffScheme scheme;
  size_t cont_seen = 0;
  for (int k = 0; k < data.p(); ++k) {
    CutoffScheme::Entry entry;
    entry.variable = data.variable_names()[static_cast<size_t>(k)];
    entry.kind = data.variable_kinds()[static_cast<size_t>(k)];
    if (entry.kind == VariableKind::continuous) {
      if (cont_seen >= continuous_cutoffs.size())
        throw std::invalid_argument("build_scheme: missing cutoffs for " + entry.variable);
      entry.cutoffs = continuous_cutoffs[cont_seen++];
      for (size_t i = 1; i < entry.cutoffs.size(); ++i) {
        if (!(entry.cutoffs[i] > entry.cutoffs[i - 1]))
          throw std::invalid_argument("build_scheme: cutoffs not strictly increasing");
      }
    } else {
      Eigen::VectorXd col = data.column(k);
      std::vector<double> levels(col.data(), col.data() + col.size());
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
      entry.levels = std::move(levels);
    }
    scheme.entries.push_back(std::move(entry));
  }
  if (cont_seen != continuous_cutoffs.size())
    throw std::invalid_argument("build_scheme: extra cutoff lists supplied");
  return scheme;
}

int category_of(double value, const CutoffScheme::Entry& entry) {
  if (entry.kind == VariableKind::continuous) {
    // Left-closed intervals: value in [c_i, c_{i+1}) has index i+1.
    int idx = 0;
    for (double c : entry.cutoffs) {
      if (value >= c) ++idx;
      else break;
    }
    return idx;
  }
  auto it = std::find(entry.levels.begin(), entry.levels.end(), value);
  if (it == entry.levels.end())
    throw std::invalid_argument("category_of: unknown level " + format_value(value) + " for " +
                                entry.variable);
  return static_cast<int>(it - entry.levels.begin());
}

CategoricalDesign categorize(const SurvivalDataset& data, const CutoffScheme& scheme) {
  const int n = data.n();
  const int p = data.p();

  std::vector<const CutoffScheme::Entry*> entries(static_cast<size_t>(p));
  for (int k = 0; k < p; ++k) {
    entries[static_cast<size_t>(k)] = scheme.find(data.variable_names()[static_cast<size_t>(k)]);
    if (!entries[static_cast<size_t>(k)])
      throw std::invalid_argument("categorize: scheme does not cover variable " +
                                  data.variable_names()[static_cast<size_t>(k)]);
  }

  std::vector<CategoricalDesign::VariableLayout> layout(static_cast<size_t>(p));
  int dummy_cols = 0;
  for (int k = 0; k < p; ++k) {
    const auto& e = *entries[static_cast<size_t>(k)];
    auto& l = layout[static_cast<size_t>(k)];
    l.name = e.variable;
    l.kind = e.kind;
    if (e.kind == VariableKind::continuous) {
      l.cutoffs_or_levels = e.cutoffs;
      l.labels = interval_labels(e.cutoffs);
      l.n_categories = static_cast<int>(e.cutoffs.size()) + 1;
    } else {
      l.cutoffs_or_levels = e.levels;
      for (double level : e.levels) l.labels.push_back(format_value(level));
      l.n_categories = static_cast<int>(e.levels.size());
    }
    if (l.n_categories > 1) {
      l.first_dummy_column = dummy_cols;
      dummy_cols += l.n_categories - 1;
    }
  }

  Eigen::MatrixXi category(n, p);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < p; ++k)
      category(i, k) = category_of(data.record(i).covariates(k), *entries[static_cast<size_t>(k)]);
  }

  std::vector<std::string> dummy_names;
  std::vector<VariableKind> dummy_kinds;
  for (int k = 0; k < p; ++k) {
    const auto& l = layout[static_cast<size_t>(k)];
    for (int c = 1; c < l.n_categories; ++c) {
      dummy_names.push_back(l.name + ":" + std::to_string(c));
      dummy_kinds.push_back(VariableKind::categorical);
    }
  }

  std::vector<SurvivalRecord> encoded(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& r = encoded[static_cast<size_t>(i)];
    const auto& src = data.record(i);
    r.time = src.time;
    r.event = src.event;
    r.site_id = src.site_id;
    r.covariates = Eigen::VectorXd::Zero(dummy_cols);
    for (int k = 0; k < p; ++k) {
      const auto& l = layout[static_cast<size_t>(k)];
      const int c = category(i, k);
      if (c > 0 && l.first_dummy_column >= 0) r.covariates(l.first_dummy_column + c - 1) = 1.0;
    }
  }

  CategoricalDesign design{std::move(layout), std::move(category),
                           SurvivalDataset(std::move(encoded), std::move(dummy_names),
                                           std::move(dummy_kinds))};
  return design;
}

CutoffScheme merge_similar_categories(const CategoricalDesign& design, const CoxFit& fit,
                                      double epsilon) {
  if (fit.beta_hat.size() != design.encoded.p())
    throw std::invalid_argument("merge_similar_categories: fit does not match design");

  CutoffScheme merged;
  for (const auto& l : design.variables) {
    CutoffScheme::Entry entry;
    entry.variable = l.name;
    entry.kind = l.kind;
    if (l.kind != VariableKind::continuous) {
      entry.levels = l.cutoffs_or_levels;
      merged.entries.push_back(std::move(entry));
      continue;
    }
    // Coefficients per category, reference interval pinned at 0.
    std::vector<double> coef(static_cast<size_t>(l.n_categories), 0.0);
    for (int c = 1; c < l.n_categories; ++c)
      coef[static_cast<size_t>(c)] = fit.beta_hat(l.first_dummy_column + c - 1);
    for (size_t b = 0; b + 1 < coef.size(); ++b) {
      const double gap = std::fabs(coef[b + 1] - coef[b]);
      const bool merge = gap < epsilon || gap == 0.0;
      if (!merge) entry.cutoffs.push_back(l.cutoffs_or_levels[b]);
    }
    merged.entries.push_back(std::move(entry));
  }
  return merged;
}

}  // namespace fedsurv
