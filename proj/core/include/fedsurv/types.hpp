#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace fedsurv {

enum class VariableKind { continuous, categorical };

std::string to_string(VariableKind kind);
VariableKind variable_kind_from_string(const std::string& s);

/// One subject: observed time in days, event indicator (1 = event,
/// 0 = censored), covariate vector, and the owning site's label.
struct SurvivalRecord {
  double time = 0.0;
  int event = 0;
  Eigen::VectorXd covariates;
  int site_id = 0;
};

/// A site's collection of subjects with a shared variable schema.
/// Construction validates: n >= 1, times finite and nonnegative,
/// events in {0,1}, per-record covariate length equal to the declared
/// number of variables, unique variable names, no non-finite values.
class SurvivalDataset {
 public:
  SurvivalDataset(std::vector<SurvivalRecord> records,
                  std::vector<std::string> variable_names,
                  std::vector<VariableKind> variable_kinds);

  int n() const { return static_cast<int>(records_.size()); }
  int p() const { return static_cast<int>(variable_names_.size()); }
  const std::vector<SurvivalRecord>& records() const { return records_; }
  const SurvivalRecord& record(int i) const { return records_[static_cast<size_t>(i)]; }
  const std::vector<std::string>& variable_names() const { return variable_names_; }
  const std::vector<VariableKind>& variable_kinds() const { return variable_kinds_; }

  int event_count() const;
  /// Index of a named variable, -1 when absent.
  int index_of(const std::string& name) const;
  Eigen::VectorXd column(int k) const;
  std::vector<double> times() const;
  std::vector<int> events() const;

  SurvivalDataset subset(const std::vector<int>& rows) const;
  SurvivalDataset select_variables(const std::vector<int>& keep) const;

 private:
  std::vector<SurvivalRecord> records_;
  std::vector<std::string> variable_names_;
  std::vector<VariableKind> variable_kinds_;
};

/// Right-continuous step estimate of a survival function. `times` holds
/// the distinct event times; `survival[i]` is the value on
/// [times[i], times[i+1]). Censored-only times do not appear.
struct StepSurvivalCurve {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<int> at_risk;
  std::vector<int> events;

  double survival_at(double t) const;      // S(t), right-continuous
  double survival_before(double t) const;  // S(t-), left limit
};

/// Nondecreasing step estimate of a cumulative hazard.
struct CumulativeHazardCurve {
  std::vector<double> times;
  std::vector<double> cum_hazard;
  std::vector<int> at_risk;
  std::vector<int> events;

  double value_at(double t) const;
};

}  // namespace fedsurv
