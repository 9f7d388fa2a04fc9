#pragma once

#include "fedsurv/federation.hpp"

#include <map>
#include <string>
#include <vector>

namespace fedsurv {

/// Effective run configuration: one master seed drives the generator,
/// every pipeline stream, and the evaluation resamples. Precedence is
/// command-line overrides > config file > defaults.
struct RunConfig {
  std::string run_dir = "run";
  uint64_t seed = 20240101;
  GeneratorConfig generator = GeneratorConfig::default_benchmark();
  PipelineConfig pipeline;

  /// Canonical key=value echo of every effective setting.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

/// `key=value` lines, `#` comments, blank lines ignored.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Assemble a RunConfig from an optional config file plus overrides.
/// Unknown keys are errors.
RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::pair<std::string, std::string>>& overrides);

/// Reconstruct a scoring table from its CSV artifact.
ScoringTable scoring_table_from_csv(const std::string& text);

// Stages. Each reads its prerequisites from the run directory (error
// naming the stage that produces a missing artifact), writes its own
// artifacts, and records them in manifest.txt.
void stage_gen_data(const RunConfig& config);
void stage_rank(const RunConfig& config);
void stage_cutoffs(const RunConfig& config);
void stage_parsimony(const RunConfig& config);
void stage_select(const RunConfig& config);
void stage_fit_federated(const RunConfig& config);
void stage_fit_local(const RunConfig& config);
void stage_evaluate(const RunConfig& config);
void stage_score(const RunConfig& config, const std::string& table_path,
                 const std::string& input_path, const std::string& output_path);
void stage_run_all(const RunConfig& config);

}  // namespace fedsurv
