#include "fedsurv/scoring.hpp"

#include "fedsurv/math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedsurv {

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

long long ScoringTable::max_total() const {
  long long total = 0;
  for (const auto& v : variables)
    total += *std::max_element(v.points.begin(), v.points.end());
  return total;
}

std::string ScoringTable::to_csv() const {
  std::string out = "variable,interval,points\n";
  for (const auto& v : variables) {
    for (size_t c = 0; c < v.points.size(); ++c) {
      out += csv_quote(v.name) + "," + csv_quote(v.labels[c]) + "," +
             std::to_string(v.points[c]) + "\n";
    }
  }
  return out;
}

std::string ScoringTable::to_text() const {
  size_t name_width = 8, label_width = 8;
  for (const auto& v : variables) {
    name_width = std::max(name_width, v.name.size());
    for (const auto& l : v.labels) label_width = std::max(label_width, l.size());
  }
  std::string out;
  auto pad = [](const std::string& s, size_t w) { return s + std::string(w - s.size() + 2, ' '); };
  out += pad("Variable", name_width) + pad("Interval", label_width) + "Points\n";
  for (const auto& v : variables) {
    for (size_t c = 0; c < v.points.size(); ++c) {
      out += pad(c == 0 ? v.name : "", name_width) + pad(v.labels[c], label_width) +
             std::to_string(v.points[c]) + "\n";
    }
  }
  return out;
}

ScoringTable derive_scores(const CategoricalDesign& design, const Eigen::VectorXd& beta,
                           long long s_max, std::string source) {
  if (beta.size() != design.encoded.p())
    throw std::invalid_argument("derive_scores: coefficient length does not match design");
  if (s_max < 1) throw std::invalid_argument("derive_scores: s_max must be >= 1");

  // Per-variable shifted coefficients (reference category at 0).
  std::vector<std::vector<double>> shifted;
  double total_range = 0.0;
  for (const auto& l : design.variables) {
    std::vector<double> coef(static_cast<size_t>(l.n_categories), 0.0);
    for (int c = 1; c < l.n_categories; ++c)
      coef[static_cast<size_t>(c)] = beta(l.first_dummy_column + c - 1);
    const double lo = *std::min_element(coef.begin(), coef.end());
    for (double& v : coef) v -= lo;
    total_range += *std::max_element(coef.begin(), coef.end());
    shifted.push_back(std::move(coef));
  }
  if (!(total_range > 0.0)) throw std::runtime_error("uninformative model");

  const double scale = static_cast<double>(s_max) / total_range;
  ScoringTable table;
  table.s_max = s_max;
  table.scale = scale;
  table.source = std::move(source);
  for (size_t v = 0; v < design.variables.size(); ++v) {
    const auto& l = design.variables[v];
    ScoringTable::Variable out;
    out.name = l.name;
    out.kind = l.kind;
    out.cutoffs_or_levels = l.cutoffs_or_levels;
    out.labels = l.labels;
    for (double c : shifted[v]) out.points.push_back(round_half_away_from_zero(c * scale));
    table.variables.push_back(std::move(out));
  }

  // Half-away rounding can push the achievable maximum past s_max by a
  // point or two; walk it back from the rows that rounded up hardest.
  while (table.max_total() > s_max) {
    size_t worst = 0;
    double worst_error = -1.0;
    for (size_t v = 0; v < table.variables.size(); ++v) {
      auto& var = table.variables[v];
      const auto max_it = std::max_element(var.points.begin(), var.points.end());
      const size_t c = static_cast<size_t>(max_it - var.points.begin());
      if (*max_it < 1) continue;
      const double error = static_cast<double>(*max_it) - shifted[v][c] * scale;
      if (error > worst_error) {
        worst_error = error;
        worst = v;
      }
    }
    auto& var = table.variables[worst];
    *std::max_element(var.points.begin(), var.points.end()) -= 1;
  }
  return table;
}

long long score_subject(const ScoringTable& table, const std::vector<std::string>& names,
                        const Eigen::VectorXd& values) {
  if (static_cast<size_t>(values.size()) != names.size())
    throw std::invalid_argument("score_subject: names and values disagree in length");
  long long total = 0;
  for (const auto& v : table.variables) {
    auto it = std::find(names.begin(), names.end(), v.name);
    if (it == names.end())
      throw std::invalid_argument("score_subject: missing variable " + v.name);
    const double value = values(static_cast<Eigen::Index>(it - names.begin()));
    CutoffScheme::Entry entry;
    entry.variable = v.name;
    entry.kind = v.kind;
    if (v.kind == VariableKind::continuous) entry.cutoffs = v.cutoffs_or_levels;
    else entry.levels = v.cutoffs_or_levels;
    total += v.points[static_cast<size_t>(category_of(value, entry))];
  }
  return total;
}

long long score_subject(const ScoringTable& table, const SurvivalDataset& data, int row) {
  return score_subject(table, data.variable_names(), data.record(row).covariates);
}

Eigen::VectorXd score_dataset(const ScoringTable& table, const SurvivalDataset& data) {
  Eigen::VectorXd scores(data.n());
  for (int i = 0; i < data.n(); ++i)
    scores(i) = static_cast<double>(score_subject(table, data, i));
  return scores;
}

}  // namespace fedsurv
