#include "fedsurv/federation.hpp"

#include "fedsurv/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedsurv {

Eigen::VectorXd GeneratorConfig::true_beta() const {
  Eigen::VectorXd beta(static_cast<Eigen::Index>(covariates.size()));
  for (size_t k = 0; k < covariates.size(); ++k) beta(static_cast<Eigen::Index>(k)) = covariates[k].beta;
  return beta;
}

void GeneratorConfig::validate() const {
  if (site_sizes.empty()) throw std::invalid_argument("generator: no sites");
  for (int n : site_sizes) {
    if (n < 1) throw std::invalid_argument("generator: site sizes must be >= 1");
  }
  if (covariates.empty()) throw std::invalid_argument("generator: no covariates");
  const size_t k = site_sizes.size();
  if (weibull_shape.size() != k || weibull_scale.size() != k)
    throw std::invalid_argument("generator: need one Weibull shape and scale per site");
  for (size_t j = 0; j < k; ++j) {
    if (!(weibull_shape[j] > 0.0) || !(weibull_scale[j] > 0.0))
      throw std::invalid_argument("generator: Weibull parameters must be positive");
  }
  if (!(censoring_target >= 0.0 && censoring_target < 1.0))
    throw std::invalid_argument("generator: censoring target must lie in [0,1)");
  if (!(t_max > 0.0)) throw std::invalid_argument("generator: t_max must be positive");
  for (const auto& c : covariates) {
    if (!c.site_shift.empty() && c.site_shift.size() != k)
      throw std::invalid_argument("generator: site shift length mismatch for " + c.name);
    if (c.kind == VariableKind::categorical && !(c.prevalence > 0.0 && c.prevalence < 1.0))
      throw std::invalid_argument("generator: prevalence must lie in (0,1) for " + c.name);
    if (c.kind == VariableKind::continuous && !(c.sd > 0.0))
      throw std::invalid_argument("generator: sd must be positive for " + c.name);
  }
}

GeneratorConfig GeneratorConfig::default_benchmark() {
  GeneratorConfig g;
  g.site_sizes = {600, 600, 500, 1000, 1500, 2000};
  g.weibull_shape = {1.0, 1.05, 1.2, 1.15, 1.25, 1.1};
  g.weibull_scale = {60, 66, 55, 58, 62, 57};
  g.censoring_target = 0.68;
  g.t_max = 30.0;
  g.seed = 20240101;

  auto cont = [](std::string name, double mean, double sd, double beta,
                 std::vector<double> shift = {}) {
    CovariateSpec c;
    c.name = std::move(name);
    c.kind = VariableKind::continuous;
    c.mean = mean;
    c.sd = sd;
    c.beta = beta;
    c.site_shift = std::move(shift);
    return c;
  };
  auto flag = [](std::string name, double prevalence, double beta,
                 std::vector<double> shift = {}) {
    CovariateSpec c;
    c.name = std::move(name);
    c.kind = VariableKind::categorical;
    c.prevalence = prevalence;
    c.beta = beta;
    c.site_shift = std::move(shift);
    return c;
  };
  g.covariates = {
      cont("age", 62.0, 18.0, 0.03, {-2.5, -2.5, 0.0, 0.0, 0.0, 0.0}),
      cont("pulse", 80.0, 18.0, 0.015, {3.0, 3.0, 0.0, 0.0, 0.0, 0.0}),
      cont("resp", 17.4, 2.0, 0.10),
      cont("sbp", 128.0, 22.0, -0.01),
      cont("spo2", 98.0, 3.0, -0.04, {0.3, 0.2, 0.0, 0.0, 0.0, 0.0}),
      flag("mi", 0.08, 0.8),
      flag("chf", 0.10, 0.6),
      flag("kidney", 0.22, 0.45, {-0.08, -0.08, 0.0, 0.0, 0.0, 0.0}),
      flag("pvd", 0.05, 0.0),
  };
  return g;
}

std::vector<SurvivalDataset> generate_sites(const GeneratorConfig& config) {
  config.validate();
  const int p = static_cast<int>(config.covariates.size());
  std::vector<std::string> names;
  std::vector<VariableKind> kinds;
  for (const auto& c : config.covariates) {
    names.push_back(c.name);
    kinds.push_back(c.kind);
  }
  const Eigen::VectorXd beta = config.true_beta();

  std::vector<SurvivalDataset> sites;
  for (int site = 0; site < config.n_sites(); ++site) {
    Rng rng = Rng::derive(config.seed, "site-data", {static_cast<uint64_t>(site)});
    const int n = config.site_sizes[static_cast<size_t>(site)];
    const double shape = config.weibull_shape[static_cast<size_t>(site)];
    const double scale = config.weibull_scale[static_cast<size_t>(site)];

    // Center the linear predictor at its per-site expectation; the
    // constant is absorbed by the baseline hazard, so the Weibull scale
    // stays the typical-subject time scale whatever the covariate units.
    double eta_center = 0.0;
    for (int k = 0; k < p; ++k) {
      const auto& c = config.covariates[static_cast<size_t>(k)];
      const double shift = c.site_shift.empty() ? 0.0 : c.site_shift[static_cast<size_t>(site)];
      eta_center += c.beta * (c.kind == VariableKind::continuous
                                  ? c.mean + shift
                                  : std::clamp(c.prevalence + shift, 1e-3, 1.0 - 1e-3));
    }

    std::vector<Eigen::VectorXd> x(static_cast<size_t>(n));
    std::vector<double> latent(static_cast<size_t>(n));
    std::vector<double> censor_u(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd row(p);
      for (int k = 0; k < p; ++k) {
        const auto& c = config.covariates[static_cast<size_t>(k)];
        const double shift = c.site_shift.empty() ? 0.0 : c.site_shift[static_cast<size_t>(site)];
        if (c.kind == VariableKind::continuous) {
          row(k) = rng.normal(c.mean + shift, c.sd);
        } else {
          const double prev = std::clamp(c.prevalence + shift, 1e-3, 1.0 - 1e-3);
          row(k) = rng.bernoulli(prev) ? 1.0 : 0.0;
        }
      }
      const double multiplier = std::exp(beta.dot(row) - eta_center);
      latent[static_cast<size_t>(i)] =
          scale * std::pow(rng.exponential(1.0) / multiplier, 1.0 / shape);
      censor_u[static_cast<size_t>(i)] = rng.uniform();
      x[static_cast<size_t>(i)] = std::move(row);
    }

    // Exponential censoring rate found by bisection against the target
    // censored fraction (administrative censoring included).
    auto censored_fraction = [&](double rate) {
      int censored = 0;
      for (int i = 0; i < n; ++i) {
        const double c = rate > 0.0
                             ? -std::log(1.0 - censor_u[static_cast<size_t>(i)]) / rate
                             : std::numeric_limits<double>::infinity();
        if (!(latent[static_cast<size_t>(i)] <= std::min(c, config.t_max))) ++censored;
      }
      return static_cast<double>(censored) / n;
    };

    double rate = 0.0;
    if (config.censoring_target > 0.0 || censored_fraction(0.0) > 0.0) {
      const double floor_fraction = censored_fraction(0.0);
      if (floor_fraction > config.censoring_target + 0.5 / n)
        throw std::runtime_error("unattainable censoring target at site " + std::to_string(site));
      double lo = 0.0, hi = 1e-6;
      int doublings = 0;
      while (censored_fraction(hi) < config.censoring_target) {
        hi *= 2.0;
        if (++doublings > 200)
          throw std::runtime_error("unattainable censoring target at site " +
                                   std::to_string(site));
      }
      for (int step = 0; step < 100; ++step) {
        const double mid = 0.5 * (lo + hi);
        (censored_fraction(mid) < config.censoring_target ? lo : hi) = mid;
      }
      rate = 0.5 * (lo + hi);
    }

    std::vector<SurvivalRecord> records(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double c = rate > 0.0
                           ? -std::log(1.0 - censor_u[static_cast<size_t>(i)]) / rate
                           : std::numeric_limits<double>::infinity();
      const double horizon = std::min(c, config.t_max);
      auto& r = records[static_cast<size_t>(i)];
      r.covariates = std::move(x[static_cast<size_t>(i)]);
      r.site_id = site;
      if (latent[static_cast<size_t>(i)] <= horizon) {
        r.time = latent[static_cast<size_t>(i)];
        r.event = 1;
      } else {
        r.time = horizon;
        r.event = 0;
      }
    }
    sites.emplace_back(std::move(records), names, kinds);
  }
  return sites;
}

TrainTestSplit split_train_test(const SurvivalDataset& data, double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split_train_test: fraction must lie in (0,1)");
  std::vector<int> events, censored;
  for (int i = 0; i < data.n(); ++i)
    (data.record(i).event == 1 ? events : censored).push_back(i);
  Rng rng = Rng::derive(seed, "train-test-split");
  rng.shuffle(events);
  rng.shuffle(censored);

  std::vector<int> test_rows, train_rows;
  auto take = [&](std::vector<int>& group) {
    const int n_test = static_cast<int>(std::lround(test_fraction * group.size()));
    for (size_t i = 0; i < group.size(); ++i)
      (static_cast<int>(i) < n_test ? test_rows : train_rows).push_back(group[i]);
  };
  take(events);
  take(censored);
  if (train_rows.empty() || test_rows.empty())
    throw std::runtime_error("split_train_test: degenerate split");
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {data.subset(train_rows), data.subset(test_rows)};
}

namespace {

// Scheme over the kept variables: unified cutoffs for continuous ones,
// the cross-site union of observed levels for categorical ones.
CutoffScheme shared_scheme(const std::vector<const SurvivalDataset*>& sites,
                           const std::vector<int>& kept,
                           const std::vector<std::vector<double>>& unified_by_variable) {
  CutoffScheme scheme;
  const auto& reference = *sites.front();
  for (int k : kept) {
    CutoffScheme::Entry entry;
    entry.variable = reference.variable_names()[static_cast<size_t>(k)];
    entry.kind = reference.variable_kinds()[static_cast<size_t>(k)];
    if (entry.kind == VariableKind::continuous) {
      entry.cutoffs = unified_by_variable[static_cast<size_t>(k)];
    } else {
      std::vector<double> levels;
      for (const auto* site : sites) {
        const Eigen::VectorXd col = site->column(k);
        levels.insert(levels.end(), col.data(), col.data() + col.size());
      }
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
      entry.levels = std::move(levels);
    }
    scheme.entries.push_back(std::move(entry));
  }
  return scheme;
}

bool same_cutoffs(const CutoffScheme& a, const CutoffScheme& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (size_t i = 0; i < a.entries.size(); ++i) {
    if (a.entries[i].cutoffs != b.entries[i].cutoffs) return false;
  }
  return true;
}

int total_dummies(const CutoffScheme& scheme) {
  int total = 0;
  for (const auto& e : scheme.entries) {
    const int categories = e.kind == VariableKind::continuous
                               ? static_cast<int>(e.cutoffs.size()) + 1
                               : static_cast<int>(e.levels.size());
    total += std::max(0, categories - 1);
  }
  return total;
}

}  // namespace

DerivedScore derive_score_model(const std::vector<const SurvivalDataset*>& train_sites,
                                const SiteWeights& weights, const PipelineConfig& config) {
  if (train_sites.empty()) throw std::invalid_argument("derive_score_model: no sites");
  const auto& reference = *train_sites.front();
  const int p = reference.p();

  // Per-site quantile cutoffs, unified position-wise.
  std::vector<std::string> dropped;
  std::vector<std::vector<double>> unified(static_cast<size_t>(p));
  std::vector<int> kept;
  for (int k = 0; k < p; ++k) {
    if (reference.variable_kinds()[static_cast<size_t>(k)] != VariableKind::continuous) {
      kept.push_back(k);
      continue;
    }
    std::vector<std::vector<double>> raw;
    for (const auto* site : train_sites)
      raw.push_back(local_quantile_cutoffs(*site, k, config.percentiles).raw);
    unified[static_cast<size_t>(k)] = unify_cutoffs(raw, weights);
    if (unified[static_cast<size_t>(k)].empty()) {
      dropped.push_back(reference.variable_names()[static_cast<size_t>(k)]);
    } else {
      kept.push_back(k);
    }
  }
  if (kept.empty()) throw std::runtime_error("derive_score_model: no usable variables");

  std::vector<SurvivalDataset> restricted;
  restricted.reserve(train_sites.size());
  for (const auto* site : train_sites) restricted.push_back(site->select_variables(kept));
  std::vector<const SurvivalDataset*> restricted_ptrs;
  for (const auto& site : restricted) restricted_ptrs.push_back(&site);

  CutoffScheme scheme = shared_scheme(restricted_ptrs, [&] {
    std::vector<int> all(kept.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }(), [&] {
    std::vector<std::vector<double>> by_restricted(kept.size());
    for (size_t i = 0; i < kept.size(); ++i)
      by_restricted[i] = unified[static_cast<size_t>(kept[i])];
    return by_restricted;
  }());

  auto fit_on_scheme = [&](const CutoffScheme& s) {
    std::vector<CategoricalDesign> designs;
    std::vector<const SurvivalDataset*> encoded;
    designs.reserve(restricted.size());
    for (const auto& site : restricted) designs.push_back(categorize(site, s));
    for (const auto& d : designs) encoded.push_back(&d.encoded);
    FederatedFit fed = run_odach(encoded);
    return std::pair<std::vector<CategoricalDesign>, FederatedFit>(std::move(designs),
                                                                   std::move(fed));
  };

  auto [designs, fed] = fit_on_scheme(scheme);

  // One merge pass over adjacent categories with similar effects; refit
  // when the scheme actually changed.
  CoxFit as_fit;
  as_fit.beta_hat = fed.beta_final;
  as_fit.covariance = fed.covariance_final;
  as_fit.converged = true;
  CutoffScheme merged = merge_similar_categories(designs.front(), as_fit, config.merge_epsilon);
  if (!same_cutoffs(merged, scheme) && total_dummies(merged) >= 1) {
    auto refit = fit_on_scheme(merged);
    designs = std::move(refit.first);
    fed = std::move(refit.second);
    scheme = std::move(merged);
  }

  ScoringTable table = derive_scores(designs.front(), fed.beta_final, config.s_max, "odach");
  return DerivedScore{std::move(scheme), std::move(designs.front()), std::move(fed),
                      std::move(table), std::move(dropped)};
}

FittedModel fit_pipeline(const std::vector<const SurvivalDataset*>& train_sites,
                         const SiteWeights& weights, const PipelineConfig& config) {
  if (train_sites.empty()) throw std::invalid_argument("fit_pipeline: no sites");
  if (weights.size() != static_cast<int>(train_sites.size()))
    throw std::invalid_argument("fit_pipeline: weight count mismatch");

  FittedModel model;

  // Module 1: per-site screening and ranking, weighted aggregation.
  for (size_t j = 0; j < train_sites.size(); ++j) {
    if (train_sites[j]->p() >= 2) {
      model.collinearity.push_back(
          multicollinearity_screen(*train_sites[j], config.collinearity_threshold));
      for (const auto& pair : model.collinearity.back().pairs) {
        model.warnings.push_back(
            "site " + std::to_string(j) + ": |r|=" + std::to_string(std::fabs(pair.r)) +
            " between " + train_sites[j]->variable_names()[static_cast<size_t>(pair.first)] +
            " and " + train_sites[j]->variable_names()[static_cast<size_t>(pair.second)]);
      }
    }
    RsfConfig rsf = config.rsf;
    rsf.seed = Rng::derive_seed(config.seed, "rsf", {static_cast<uint64_t>(j)});
    model.local_rankings.push_back(rsf_importance(*train_sites[j], rsf));
  }
  model.global_ranks = aggregate_ranks(model.local_rankings, weights);

  // Modules 2-4: cross-validated parsimony over the ranked prefixes,
  // then the final refit on the selected variables.
  auto fitter = [&](const std::vector<const SurvivalDataset*>& fold_train) {
    return derive_score_model(fold_train, weights, config).table;
  };
  ParsimonyOptions popts;
  popts.cv_folds = config.cv_folds;
  popts.seed = Rng::derive_seed(config.seed, "cv-parsimony");
  model.parsimony = parsimony_curve(model.global_ranks, train_sites, weights, fitter, popts);
  model.selection = select_model(model.parsimony, config.max_variables, config.delta);

  std::vector<int> chosen;
  for (const auto& name : model.selection.variables) {
    const int idx = train_sites.front()->index_of(name);
    if (idx < 0) throw std::runtime_error("fit_pipeline: selected variable vanished: " + name);
    chosen.push_back(idx);
  }
  std::vector<SurvivalDataset> final_train;
  final_train.reserve(train_sites.size());
  for (const auto* site : train_sites) final_train.push_back(site->select_variables(chosen));
  std::vector<const SurvivalDataset*> final_ptrs;
  for (const auto& site : final_train) final_ptrs.push_back(&site);

  DerivedScore derived = derive_score_model(final_ptrs, weights, config);
  model.scheme = std::move(derived.scheme);
  model.fed = std::move(derived.fed);
  model.table = std::move(derived.table);
  for (const auto& name : derived.dropped_variables)
    model.warnings.push_back("variable dropped (no usable cutoffs): " + name);
  for (const auto& w : model.parsimony.warnings) model.warnings.push_back(w);
  return model;
}

ExperimentResult run_experiment(const GeneratorConfig& generator, const PipelineConfig& config) {
  ExperimentResult result;
  std::vector<SurvivalDataset> full = generate_sites(generator);

  std::vector<int> train_sizes;
  for (size_t k = 0; k < full.size(); ++k) {
    TrainTestSplit split = split_train_test(
        full[k], config.test_fraction, Rng::derive_seed(config.seed, "split", {static_cast<uint64_t>(k)}));
    result.sites.push_back(
        SiteHandle{static_cast<int>(k), std::move(split.train), std::move(split.test), 0.0});
    train_sizes.push_back(result.sites.back().train.n());
  }
  SiteWeights weights = config.custom_weights.empty()
                            ? SiteWeights::from_sample_sizes(train_sizes)
                            : SiteWeights(config.custom_weights);
  for (size_t k = 0; k < result.sites.size(); ++k)
    result.sites[k].weight = weights.weight(static_cast<int>(k));

  std::vector<const SurvivalDataset*> train_ptrs;
  for (const auto& site : result.sites) train_ptrs.push_back(&site.train);
  result.federated = fit_pipeline(train_ptrs, weights, config);

  for (double t = 1.0; t <= generator.t_max + 1e-9; t += 1.0)
    result.evaluation_grid.push_back(t);

  EvaluateOptions eval;
  eval.n_bootstrap = config.n_bootstrap;
  eval.level = config.ci_level;
  for (size_t k = 0; k < result.sites.size(); ++k) {
    eval.seed = Rng::derive_seed(config.seed, "eval", {static_cast<uint64_t>(k)});
    const Eigen::VectorXd scores = score_dataset(result.federated.table, result.sites[k].test);
    result.federated_reports.push_back(
        evaluate_scores(scores, result.sites[k].test, result.evaluation_grid, eval));
  }

  for (size_t k = 0; k < result.sites.size(); ++k) {
    result.locals.push_back(fit_pipeline({&result.sites[k].train}, SiteWeights({1.0}), config));
    eval.seed = Rng::derive_seed(config.seed, "eval", {static_cast<uint64_t>(k)});
    const Eigen::VectorXd scores = score_dataset(result.locals.back().table, result.sites[k].test);
    result.local_reports.push_back(
        evaluate_scores(scores, result.sites[k].test, result.evaluation_grid, eval));
  }
  return result;
}

}  // namespace fedsurv
