#include "fedsurv/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace fedsurv {

std::string to_string(VariableKind kind) {
  return kind == VariableKind::continuous ? "continuous" : "categorical";
}

VariableKind variable_kind_from_string(const std::string& s) {
  if (s == "continuous") return VariableKind::continuous;
  if (s == "categorical") return VariableKind::categorical;
  throw std::invalid_argument("unknown variable kind: " + s);
}

SurvivalDataset::SurvivalDataset(std::vector<SurvivalRecord> records,
                                 std::vector<std::string> variable_names,
                                 std::vector<VariableKind> variable_kinds)
    : records_(std::move(records)),
      variable_names_(std::move(variable_names)),
      variable_kinds_(std::move(variable_kinds)) {
  if (records_.empty()) throw std::invalid_argument("empty dataset");
  if (variable_kinds_.size() != variable_names_.size())
    throw std::invalid_argument("variable kinds and names disagree in length");
  std::unordered_set<std::string> seen;
  for (const auto& name : variable_names_) {
    if (!seen.insert(name).second)
      throw std::invalid_argument("duplicate variable name: " + name);
  }
  const auto p = static_cast<Eigen::Index>(variable_names_.size());
  for (size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!std::isfinite(r.time) || r.time < 0.0)
      throw std::invalid_argument("record " + std::to_string(i) + ": time must be finite and >= 0");
    if (r.event != 0 && r.event != 1)
      throw std::invalid_argument("record " + std::to_string(i) + ": event must be 0 or 1");
    if (r.covariates.size() != p)
      throw std::invalid_argument("record " + std::to_string(i) + ": covariate length mismatch");
    if (!r.covariates.allFinite())
      throw std::invalid_argument("record " + std::to_string(i) + ": non-finite covariate");
  }
}

int SurvivalDataset::event_count() const {
  int d = 0;
  for (const auto& r : records_) d += r.event;
  return d;
}

int SurvivalDataset::index_of(const std::string& name) const {
  auto it = std::find(variable_names_.begin(), variable_names_.end(), name);
  return it == variable_names_.end() ? -1 : static_cast<int>(it - variable_names_.begin());
}

Eigen::VectorXd SurvivalDataset::column(int k) const {
  Eigen::VectorXd col(n());
  for (int i = 0; i < n(); ++i) col(i) = records_[static_cast<size_t>(i)].covariates(k);
  return col;
}

std::vector<double> SurvivalDataset::times() const {
  std::vector<double> t(records_.size());
  for (size_t i = 0; i < records_.size(); ++i) t[i] = records_[i].time;
  return t;
}

std::vector<int> SurvivalDataset::events() const {
  std::vector<int> e(records_.size());
  for (size_t i = 0; i < records_.size(); ++i) e[i] = records_[i].event;
  return e;
}

SurvivalDataset SurvivalDataset::subset(const std::vector<int>& rows) const {
  std::vector<SurvivalRecord> keep;
  keep.reserve(rows.size());
  for (int i : rows) {
    if (i < 0 || i >= n()) throw std::out_of_range("subset row out of range");
    keep.push_back(records_[static_cast<size_t>(i)]);
  }
  return SurvivalDataset(std::move(keep), variable_names_, variable_kinds_);
}

SurvivalDataset SurvivalDataset::select_variables(const std::vector<int>& keep) const {
  std::vector<std::string> names;
  std::vector<VariableKind> kinds;
  for (int k : keep) {
    if (k < 0 || k >= p()) throw std::out_of_range("variable index out of range");
    names.push_back(variable_names_[static_cast<size_t>(k)]);
    kinds.push_back(variable_kinds_[static_cast<size_t>(k)]);
  }
  std::vector<SurvivalRecord> recs = records_;
  for (auto& r : recs) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j) x(static_cast<Eigen::Index>(j)) = r.covariates(keep[j]);
    r.covariates = std::move(x);
  }
  return SurvivalDataset(std::move(recs), std::move(names), std::move(kinds));
}

namespace {

// Index of the last step time <= t (strict = false) or < t (strict = true),
// -1 when no step applies.
int step_index(const std::vector<double>& times, double t, bool strict) {
  auto it = strict ? std::lower_bound(times.begin(), times.end(), t)
                   : std::upper_bound(times.begin(), times.end(), t);
  return static_cast<int>(it - times.begin()) - 1;
}

}  // namespace

double StepSurvivalCurve::survival_at(double t) const {
  int i = step_index(times, t, false);
  return i < 0 ? 1.0 : survival[static_cast<size_t>(i)];
}

double StepSurvivalCurve::survival_before(double t) const {
  int i = step_index(times, t, true);
  return i < 0 ? 1.0 : survival[static_cast<size_t>(i)];
}

double CumulativeHazardCurve::value_at(double t) const {
  int i = step_index(times, t, false);
  return i < 0 ? 0.0 : cum_hazard[static_cast<size_t>(i)];
}

}  // namespace fedsurv
