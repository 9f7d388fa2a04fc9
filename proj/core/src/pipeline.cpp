#include "fedsurv/pipeline.hpp"

#include "fedsurv/csv.hpp"
#include "fedsurv/rng.hpp"
#include "fedsurv/survival.hpp"
#include "fedsurv/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fedsurv {

namespace fs = std::filesystem;

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) parts.push_back(part);
  if (!s.empty() && s.back() == sep) parts.push_back("");
  return parts;
}

double to_double(const std::string& s, const std::string& key) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad numeric value '" + s + "' for " + key);
  }
}

long long to_int(const std::string& s, const std::string& key) {
  const double v = to_double(s, key);
  if (v != std::floor(v)) throw std::runtime_error("config: expected integer for " + key);
  return static_cast<long long>(v);
}

std::vector<double> to_doubles(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(to_double(part, key));
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

std::string covariates_to_string(const std::vector<CovariateSpec>& covs) {
  std::string out;
  for (size_t i = 0; i < covs.size(); ++i) {
    if (i) out += ";";
    const auto& c = covs[i];
    if (c.kind == VariableKind::continuous) {
      out += c.name + ":continuous:" + format_double(c.mean) + ":" + format_double(c.sd) + ":" +
             format_double(c.beta);
    } else {
      out += c.name + ":binary:" + format_double(c.prevalence) + ":" + format_double(c.beta);
    }
  }
  return out;
}

std::vector<CovariateSpec> covariates_from_string(const std::string& s) {
  std::vector<CovariateSpec> covs;
  for (const auto& item : split(s, ';')) {
    const auto f = split(item, ':');
    CovariateSpec c;
    if (f.size() == 5 && f[1] == "continuous") {
      c.kind = VariableKind::continuous;
      c.name = f[0];
      c.mean = to_double(f[2], "covariates");
      c.sd = to_double(f[3], "covariates");
      c.beta = to_double(f[4], "covariates");
    } else if (f.size() == 4 && f[1] == "binary") {
      c.kind = VariableKind::categorical;
      c.name = f[0];
      c.prevalence = to_double(f[2], "covariates");
      c.beta = to_double(f[3], "covariates");
    } else {
      throw std::runtime_error("config: bad covariate spec '" + item +
                               "' (name:continuous:mean:sd:beta or name:binary:prevalence:beta)");
    }
    covs.push_back(std::move(c));
  }
  return covs;
}

// ---- manifest ----

class Manifest {
 public:
  explicit Manifest(const fs::path& run_dir) : path_(run_dir / "manifest.txt") {
    if (fs::exists(path_)) {
      for (const auto& line : split(read_file(path_.string()), '\n')) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "artifact") artifacts_.insert(value);
        else entries_[key] = value;
      }
    }
  }

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void add_artifact(const std::string& relative_path) { artifacts_.insert(relative_path); }
  std::string get(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? "" : it->second;
  }

  void save() const {
    std::string out;
    for (const auto& [key, value] : entries_) out += key + "=" + value + "\n";
    for (const auto& a : artifacts_) out += "artifact=" + a + "\n";
    write_file(path_.string(), out);
  }

 private:
  fs::path path_;
  std::map<std::string, std::string> entries_;  // sorted
  std::set<std::string> artifacts_;             // sorted
};

void require_artifact(const fs::path& path, const std::string& producing_stage) {
  if (!fs::exists(path))
    throw std::runtime_error("missing artifact " + path.string() + "; run stage '" +
                             producing_stage + "' first");
}

struct LoadedSites {
  std::vector<SurvivalDataset> train;
  std::vector<SurvivalDataset> test;
  SiteWeights weights{std::vector<double>{1.0}};
};

int site_count(const RunConfig& config) { return config.generator.n_sites(); }

LoadedSites load_sites(const RunConfig& config, bool with_test) {
  const fs::path dir = fs::path(config.run_dir) / "data";
  LoadedSites sites;
  std::vector<int> sizes;
  for (int k = 0; k < site_count(config); ++k) {
    const fs::path train = dir / ("site" + std::to_string(k + 1) + "_train.csv");
    require_artifact(train, "gen-data");
    sites.train.push_back(ingest_csv(train.string(), k).data);
    sizes.push_back(sites.train.back().n());
    if (with_test) {
      const fs::path test = dir / ("site" + std::to_string(k + 1) + "_test.csv");
      require_artifact(test, "gen-data");
      sites.test.push_back(ingest_csv(test.string(), k).data);
    }
  }
  sites.weights = config.pipeline.custom_weights.empty()
                      ? SiteWeights::from_sample_sizes(sizes)
                      : SiteWeights(config.pipeline.custom_weights);
  return sites;
}

std::vector<const SurvivalDataset*> pointers(const std::vector<SurvivalDataset>& sites) {
  std::vector<const SurvivalDataset*> out;
  for (const auto& s : sites) out.push_back(&s);
  return out;
}

std::vector<double> day_grid(double t_max) {
  std::vector<double> grid;
  for (double t = 1.0; t <= t_max + 1e-9; t += 1.0) grid.push_back(t);
  return grid;
}

void write_artifact(Manifest& manifest, const fs::path& run_dir, const std::string& relative,
                    const std::string& content) {
  write_file((run_dir / relative).string(), content);
  manifest.add_artifact(relative);
}

void write_binary_artifact(Manifest& manifest, const fs::path& run_dir,
                           const std::string& relative, const std::vector<uint8_t>& bytes) {
  std::string content(bytes.begin(), bytes.end());
  write_file((run_dir / relative).string(), content);
  manifest.add_artifact(relative);
}

Manifest open_manifest(const RunConfig& config) {
  fs::create_directories(config.run_dir);
  Manifest manifest{fs::path(config.run_dir)};
  manifest.set("seed", std::to_string(config.seed));
  for (const auto& [key, value] : config.echo()) manifest.set("config." + key, value);
  return manifest;
}

// Writes the derivation artifacts shared by fit-federated and the
// per-site local fits.
void write_model_artifacts(Manifest& manifest, const fs::path& run_dir, const std::string& prefix,
                           const DerivedScore& derived) {
  write_artifact(manifest, run_dir, prefix + "scoring_table.csv", derived.table.to_csv());
  write_artifact(manifest, run_dir, prefix + "scoring_table.txt", derived.table.to_text());
  write_binary_artifact(manifest, run_dir, prefix + "transcript.bin",
                        derived.fed.transcript.serialize());

  std::string fit_csv = "column,beta_bar,beta_final,se\n";
  const auto& names = derived.design.encoded.variable_names();
  for (Eigen::Index c = 0; c < derived.fed.beta_final.size(); ++c) {
    fit_csv += names[static_cast<size_t>(c)] + "," + format_double(derived.fed.beta_bar(c)) + "," +
               format_double(derived.fed.beta_final(c)) + "," +
               format_double(std::sqrt(derived.fed.covariance_final(c, c))) + "\n";
  }
  write_artifact(manifest, run_dir, prefix + "federated_fit.csv", fit_csv);
  write_artifact(manifest, run_dir, prefix + "cutoffs_final.csv", derived.scheme.to_csv());
}

}  // namespace

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("sites", std::to_string(generator.n_sites()));
  std::string sizes;
  for (size_t i = 0; i < generator.site_sizes.size(); ++i) {
    if (i) sizes += ",";
    sizes += std::to_string(generator.site_sizes[i]);
  }
  kv.emplace_back("site_sizes", sizes);
  kv.emplace_back("weibull_shapes", join_doubles(generator.weibull_shape));
  kv.emplace_back("weibull_scales", join_doubles(generator.weibull_scale));
  kv.emplace_back("censoring_target", format_double(generator.censoring_target));
  kv.emplace_back("t_max", format_double(generator.t_max));
  kv.emplace_back("covariates", covariates_to_string(generator.covariates));
  for (const auto& c : generator.covariates) {
    if (!c.site_shift.empty())
      kv.emplace_back("site_shift." + c.name, join_doubles(c.site_shift));
  }
  kv.emplace_back("percentiles", join_doubles(pipeline.percentiles));
  kv.emplace_back("epsilon", format_double(pipeline.merge_epsilon));
  kv.emplace_back("s_max", std::to_string(pipeline.s_max));
  kv.emplace_back("max_variables", std::to_string(pipeline.max_variables));
  kv.emplace_back("delta", format_double(pipeline.delta));
  kv.emplace_back("cv_folds", std::to_string(pipeline.cv_folds));
  kv.emplace_back("n_bootstrap", std::to_string(pipeline.n_bootstrap));
  kv.emplace_back("ci_level", format_double(pipeline.ci_level));
  kv.emplace_back("test_fraction", format_double(pipeline.test_fraction));
  kv.emplace_back("collinearity_threshold", format_double(pipeline.collinearity_threshold));
  kv.emplace_back("rsf_trees", std::to_string(pipeline.rsf.n_trees));
  kv.emplace_back("rsf_mtry", std::to_string(pipeline.rsf.mtry));
  kv.emplace_back("rsf_min_node_size", std::to_string(pipeline.rsf.min_node_size));
  kv.emplace_back("rsf_min_node_events", std::to_string(pipeline.rsf.min_node_events));
  kv.emplace_back("rsf_max_cutpoints", std::to_string(pipeline.rsf.max_cutpoints));
  kv.emplace_back("weights", pipeline.custom_weights.empty()
                                 ? std::string("sample-size")
                                 : join_doubles(pipeline.custom_weights));
  return kv;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
    size_t start = 0;
    while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
    line = line.substr(start);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) kv = parse_config_text(read_file(config_path));
  for (const auto& [key, value] : overrides) kv[key] = value;

  RunConfig config;
  std::vector<double> custom_weights;
  int sites_override = -1;

  for (const auto& [key, value] : kv) {
    if (key == "run_dir") config.run_dir = value;
    else if (key == "seed") config.seed = static_cast<uint64_t>(to_int(value, key));
    else if (key == "sites") sites_override = static_cast<int>(to_int(value, key));
    else if (key == "site_sizes") {
      config.generator.site_sizes.clear();
      for (double v : to_doubles(value, key))
        config.generator.site_sizes.push_back(static_cast<int>(v));
    } else if (key == "weibull_shapes") config.generator.weibull_shape = to_doubles(value, key);
    else if (key == "weibull_scales") config.generator.weibull_scale = to_doubles(value, key);
    else if (key == "censoring_target") config.generator.censoring_target = to_double(value, key);
    else if (key == "t_max") config.generator.t_max = to_double(value, key);
    else if (key == "covariates") config.generator.covariates = covariates_from_string(value);
    else if (key.rfind("site_shift.", 0) == 0) continue;  // second pass below
    else if (key == "percentiles") config.pipeline.percentiles = to_doubles(value, key);
    else if (key == "epsilon") config.pipeline.merge_epsilon = to_double(value, key);
    else if (key == "s_max") config.pipeline.s_max = to_int(value, key);
    else if (key == "max_variables") config.pipeline.max_variables = static_cast<int>(to_int(value, key));
    else if (key == "delta") config.pipeline.delta = to_double(value, key);
    else if (key == "cv_folds") config.pipeline.cv_folds = static_cast<int>(to_int(value, key));
    else if (key == "n_bootstrap") config.pipeline.n_bootstrap = static_cast<int>(to_int(value, key));
    else if (key == "ci_level") config.pipeline.ci_level = to_double(value, key);
    else if (key == "test_fraction") config.pipeline.test_fraction = to_double(value, key);
    else if (key == "collinearity_threshold")
      config.pipeline.collinearity_threshold = to_double(value, key);
    else if (key == "rsf_trees") config.pipeline.rsf.n_trees = static_cast<int>(to_int(value, key));
    else if (key == "rsf_mtry") config.pipeline.rsf.mtry = static_cast<int>(to_int(value, key));
    else if (key == "rsf_min_node_size")
      config.pipeline.rsf.min_node_size = static_cast<int>(to_int(value, key));
    else if (key == "rsf_min_node_events")
      config.pipeline.rsf.min_node_events = static_cast<int>(to_int(value, key));
    else if (key == "rsf_max_cutpoints")
      config.pipeline.rsf.max_cutpoints = static_cast<int>(to_int(value, key));
    else if (key == "weights") {
      if (value != "sample-size") custom_weights = to_doubles(value, key);
    } else {
      throw std::runtime_error("config: unknown key '" + key + "'");
    }
  }

  for (const auto& [key, value] : kv) {
    if (key.rfind("site_shift.", 0) != 0) continue;
    const std::string name = key.substr(std::string("site_shift.").size());
    bool found = false;
    for (auto& c : config.generator.covariates) {
      if (c.name == name) {
        c.site_shift = to_doubles(value, key);
        found = true;
      }
    }
    if (!found) throw std::runtime_error("config: site_shift for unknown covariate " + name);
  }

  if (sites_override > 0 &&
      sites_override != static_cast<int>(config.generator.site_sizes.size()))
    throw std::runtime_error("config: sites does not match site_sizes length");
  config.pipeline.custom_weights = custom_weights;
  config.generator.seed = config.seed;
  config.pipeline.seed = config.seed;
  config.generator.validate();
  return config;
}

ScoringTable scoring_table_from_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"variable", "interval", "points"})
    throw std::runtime_error("scoring table: bad header");

  ScoringTable table;
  table.source = "csv";
  ScoringTable::Variable* current = nullptr;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 3) throw std::runtime_error("scoring table: bad row " + std::to_string(r));
    if (!current || current->name != row[0]) {
      table.variables.emplace_back();
      current = &table.variables.back();
      current->name = row[0];
    }
    current->labels.push_back(row[1]);
    current->points.push_back(to_int(row[2], "points"));
  }

  // Recover kind and boundaries from the labels.
  for (auto& v : table.variables) {
    const bool continuous = !v.labels.empty() && (v.labels.front().rfind("<", 0) == 0 ||
                                                  v.labels.front() == "all");
    v.kind = continuous ? VariableKind::continuous : VariableKind::categorical;
    if (!continuous) {
      for (const auto& label : v.labels)
        v.cutoffs_or_levels.push_back(to_double(label, "level"));
      continue;
    }
    if (v.labels.front() == "all") continue;  // single interval
    v.cutoffs_or_levels.push_back(to_double(v.labels.front().substr(1), "cutoff"));
    for (size_t c = 1; c + 1 < v.labels.size(); ++c) {
      const auto& label = v.labels[c];
      const auto comma = label.find(',');
      if (label.front() != '[' || comma == std::string::npos || label.back() != ')')
        throw std::runtime_error("scoring table: bad interval label " + label);
      v.cutoffs_or_levels.push_back(
          to_double(label.substr(comma + 1, label.size() - comma - 2), "cutoff"));
    }
  }
  table.s_max = table.max_total();
  return table;
}

void stage_gen_data(const RunConfig& config) {
  Manifest manifest = open_manifest(config);
  const fs::path run_dir(config.run_dir);
  fs::create_directories(run_dir / "data");

  std::vector<SurvivalDataset> sites = generate_sites(config.generator);
  for (size_t k = 0; k < sites.size(); ++k) {
    TrainTestSplit tt = split_train_test(sites[k], config.pipeline.test_fraction,
                                         Rng::derive_seed(config.seed, "split", {static_cast<uint64_t>(k)}));
    const std::string stem = "data/site" + std::to_string(k + 1);
    write_artifact(manifest, run_dir, stem + "_train.csv", dataset_to_csv(tt.train));
    write_artifact(manifest, run_dir, stem + "_test.csv", dataset_to_csv(tt.test));
  }
  manifest.save();
}

void stage_rank(const RunConfig& config) {
  Manifest manifest = open_manifest(config);
  const fs::path run_dir(config.run_dir);
  LoadedSites sites = load_sites(config, false);

  std::vector<VariableRanking> rankings;
  for (size_t j = 0; j < sites.train.size(); ++j) {
    RsfConfig rsf = config.pipeline.rsf;
    rsf.seed = Rng::derive_seed(config.seed, "rsf", {static_cast<uint64_t>(j)});
    rankings.push_back(rsf_importance(sites.train[j], rsf));
    write_artifact(manifest, run_dir, "rank_site" + std::to_string(j + 1) + ".csv",
                   ranking_to_csv(rankings.back()));
  }
  const std::vector<int> global = aggregate_ranks(rankings, sites.weights);
  std::string csv = "variable,rank\n";
  for (size_t v = 0; v < rankings.front().variable_names.size(); ++v)
    csv += rankings.front().variable_names[v] + "," + std::to_string(global[v]) + "\n";
  write_artifact(manifest, run_dir, "global_ranks.csv", csv);
  manifest.save();
}

void stage_cutoffs(const RunConfig& config) {
  Manifest manifest = open_manifest(config);
  const fs::path run_dir(config.run_dir);
  LoadedSites sites = load_sites(config, false);
  const auto& reference = sites.train.front();

  CutoffScheme scheme;
  for (int k = 0; k < reference.p(); ++k) {
    CutoffScheme::Entry entry;
    entry.variable = reference.variable_names()[static_cast<size_t>(k)];
    entry.kind = reference.variable_kinds()[static_cast<size_t>(k)];
    if (entry.kind == VariableKind::continuous) {
      std::vector<std::vector<double>> raw;
      for (const auto& site : sites.train)
        raw.push_back(local_quantile_cutoffs(site, k, config.pipeline.percentiles).raw);
      entry.cutoffs = unify_cutoffs(raw, sites.weights);
    } else {
      for (const auto& site : sites.train) {
        const Eigen::VectorXd col = site.column(k);
        entry.levels.insert(entry.levels.end(), col.data(), col.data() + col.size());
      }
      std::sort(entry.levels.begin(), entry.levels.end());
      entry.levels.erase(std::unique(entry.levels.begin(), entry.levels.end()),
                         entry.levels.end());
    }
    scheme.entries.push_back(std::move(entry));
  }
  write_artifact(manifest, run_dir, "cutoffs.csv", scheme.to_csv());
  manifest.save();
}

namespace {

std::vector<int> read_global_ranks(const RunConfig& config, const SurvivalDataset& reference) {
  const fs::path path = fs::path(config.run_dir) / "global_ranks.csv";
  require_artifact(path, "rank");
  const auto rows = parse_csv(read_file(path.string()));
  std::vector<int> ranks(static_cast<size_t>(reference.p()), 0);
  for (size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) continue;
    const int idx = reference.index_of(rows[r][0]);
    if (idx < 0) throw std::runtime_error("global_ranks.csv names unknown variable " + rows[r][0]);
    ranks[static_cast<size_t>(idx)] = static_cast<int>(to_int(rows[r][1], "rank"));
  }
  return ranks;
}

ParsimonyCurve read_parsimony(const RunConfig& config) {
  const fs::path path = fs::path(config.run_dir) / "parsimony.csv";
  require_artifact(path, "parsimony");
  const auto rows = parse_csv(read_file(path.string()));
  ParsimonyCurve curve;
  std::vector<std::string> variables;
  for (size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() < 3) continue;
    ParsimonyCurve::Point pt;
    pt.m = static_cast<int>(to_int(rows[r][0], "m"));
    variables.push_back(rows[r][1]);
    pt.variables = variables;
    pt.psi = to_double(rows[r][2], "psi");
    for (size_t c = 3; c < rows[r].size(); ++c)
      pt.phi.push_back(to_double(rows[r][c], "phi"));
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

}  // namespace

void stage_parsimony(const RunConfig& config) {
  Manifest manifest = open_manifest(config);
  const fs::path run_dir(config.run_dir);
  LoadedSites sites = load_sites(config, false);
  const std::vector<int> global = read_global_ranks(config, sites.train.front());

  auto fitter = [&](const std::vector<const SurvivalDataset*>& fold_train) {
    return derive_score_model(fold_train, sites.weights, config.pipeline).table;
  };
  ParsimonyOptions popts;
  popts.cv_folds = config.pipeline.cv_folds;
  popts.seed = Rng::derive_seed(config.seed, "cv-parsimony");
  const ParsimonyCurve curve =
      parsimony_curve(global, pointers(sites.train), sites.weights, fitter, popts);

  write_artifact(manifest, run_dir, "parsimony.csv", curve.to_csv());
  write_artifact(manifest, run_dir, "parsimony.svg",
                 parsimony_plot_svg(curve, "Parsimony (federated)"));
  manifest.save();
}

void stage_select(const RunConfig& config) {
  Manifest manifest = open_manifest(config);
  const fs::path run_dir(config.run_dir);
  const ParsimonyCurve curve = read_parsimony(config);
  const ModelSelection chosen =
      select_model(curve, config.pipeline.max_variables, config.pipeline.delta);
  std::string csv = "rank,variable\n";
  for (size_t i = 0; i < chosen.variables.size(); ++i)
    csv += std::to_string(i + 1) + "," + chosen.variables[i] + "\n";
  write_artifact(manifest, run_dir, "selection.csv", csv);
  manifest.save();
}

namespace {

std::vector<std::string> read_selection(const RunConfig& config) {
  const fs::path path = fs::path(config.run_dir) / "selection.csv";
  require_artifact(path, "select");
  const auto rows = parse_csv(read_file(path.string()));
  std::vector<std::string> variables;
  for (size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() == 2) variables.push_back(rows[r][1]);
  }
  if (variables.empty()) throw std::runtime_error("selection.csv lists no variables");
  return variables;
}

}  // namespace

void stage_fit_federated(const RunConfig& config) {
  Manifest manifest = open_manifest(config);
  const fs::path run_dir(config.run_dir);
  LoadedSites sites = load_sites(config, false);
  const std::vector<std::string> selected = read_selection(config);

  std::vector<int> chosen;
  for (const auto& name : selected) {
    const int idx = sites.train.front().index_of(name);
    if (idx < 0) throw std::runtime_error("selection.csv names unknown variable " + name);
    chosen.push_back(idx);
  }
  std::vector<SurvivalDataset> restricted;
  for (const auto& site : sites.train) restricted.push_back(site.select_variables(chosen));

  const DerivedScore derived =
      derive_score_model(pointers(restricted), sites.weights, config.pipeline);
  write_model_artifacts(manifest, run_dir, "", derived);
  manifest.save();
}

void stage_fit_local(const RunConfig& config) {
  Manifest manifest = open_manifest(config);
  const fs::path run_dir(config.run_dir);
  LoadedSites sites = load_sites(config, false);

  for (size_t k = 0; k < sites.train.size(); ++k) {
    const std::string prefix = "local_site" + std::to_string(k + 1) + "/";
    fs::create_directories(run_dir / prefix);
    const FittedModel model =
        fit_pipeline({&sites.train[k]}, SiteWeights({1.0}), config.pipeline);

    write_artifact(manifest, run_dir, prefix + "rank.csv",
                   ranking_to_csv(model.local_rankings.front()));
    write_artifact(manifest, run_dir, prefix + "parsimony.csv", model.parsimony.to_csv());
    write_artifact(manifest, run_dir, prefix + "parsimony.svg",
                   parsimony_plot_svg(model.parsimony,
                                      "Parsimony (site " + std::to_string(k + 1) + ")"));
    std::string selection = "rank,variable\n";
    for (size_t i = 0; i < model.selection.variables.size(); ++i)
      selection += std::to_string(i + 1) + "," + model.selection.variables[i] + "\n";
    write_artifact(manifest, run_dir, prefix + "selection.csv", selection);
    write_artifact(manifest, run_dir, prefix + "scoring_table.csv", model.table.to_csv());
    write_artifact(manifest, run_dir, prefix + "scoring_table.txt", model.table.to_text());
    write_binary_artifact(manifest, run_dir, prefix + "transcript.bin",
                          model.fed.transcript.serialize());
  }
  manifest.save();
}

void stage_evaluate(const RunConfig& config) {
  Manifest manifest = open_manifest(config);
  const fs::path run_dir(config.run_dir);
  LoadedSites sites = load_sites(config, true);

  const fs::path federated_table_path = run_dir / "scoring_table.csv";
  require_artifact(federated_table_path, "fit-federated");
  const ScoringTable federated =
      scoring_table_from_csv(read_file(federated_table_path.string()));

  const std::vector<double> grid = day_grid(config.generator.t_max);
  EvaluateOptions eval;
  eval.n_bootstrap = config.pipeline.n_bootstrap;
  eval.level = config.pipeline.ci_level;

  std::string summary = "site,model,iauc,ci_low,ci_high,mean_auc_ci_width,n_test\n";
  for (size_t k = 0; k < sites.test.size(); ++k) {
    const fs::path local_path =
        run_dir / ("local_site" + std::to_string(k + 1)) / "scoring_table.csv";
    require_artifact(local_path, "fit-local");
    const ScoringTable local = scoring_table_from_csv(read_file(local_path.string()));

    eval.seed = Rng::derive_seed(config.seed, "eval", {static_cast<uint64_t>(k)});
    const EvaluationReport fed_report =
        evaluate_scores(score_dataset(federated, sites.test[k]), sites.test[k], grid, eval);
    const EvaluationReport local_report =
        evaluate_scores(score_dataset(local, sites.test[k]), sites.test[k], grid, eval);

    const std::string site_tag = "site" + std::to_string(k + 1);
    write_artifact(manifest, run_dir, "auc_t_" + site_tag + ".csv", fed_report.to_csv());
    write_artifact(manifest, run_dir, "auc_t_" + site_tag + "_local.csv",
                   local_report.to_csv());
    write_artifact(manifest, run_dir, "auc_t_" + site_tag + ".svg",
                   auc_plot_svg({{"federated", &fed_report}, {"local", &local_report}},
                                "AUC(t) on " + site_tag + " test data"));

    auto row = [&](const std::string& model, const EvaluationReport& report) {
      return site_tag + "," + model + "," + format_double(report.iauc) + "," +
             format_double(report.iauc_ci_low) + "," + format_double(report.iauc_ci_high) + "," +
             format_double(report.mean_ci_width()) + "," + std::to_string(sites.test[k].n()) +
             "\n";
    };
    summary += row("federated", fed_report);
    summary += row("local", local_report);
  }
  write_artifact(manifest, run_dir, "eval_summary.csv", summary);
  manifest.save();
}

void stage_score(const RunConfig& config, const std::string& table_path,
                 const std::string& input_path, const std::string& output_path) {
  const ScoringTable table = scoring_table_from_csv(read_file(table_path));
  const IngestReport input = ingest_csv(input_path);
  std::string csv = "row,total\n";
  for (int i = 0; i < input.data.n(); ++i)
    csv += std::to_string(i + 1) + "," + std::to_string(score_subject(table, input.data, i)) +
           "\n";
  write_file(output_path, csv);
  Manifest manifest = open_manifest(config);
  manifest.save();
}

void stage_run_all(const RunConfig& config) {
  stage_gen_data(config);
  stage_rank(config);
  stage_cutoffs(config);
  stage_parsimony(config);
  stage_select(config);
  stage_fit_federated(config);
  stage_fit_local(config);
  stage_evaluate(config);
}

}  // namespace fedsurv
