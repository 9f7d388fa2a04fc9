#include "fedsurv/evaluation.hpp"

#include "fedsurv/rng.hpp"
#include "fedsurv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace fedsurv {

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// Nearest-rank percentile of a sorted sample.
double percentile(const std::vector<double>& sorted, double q) {
  const int m = static_cast<int>(sorted.size());
  int rank = static_cast<int>(std::ceil(q * m));
  rank = std::clamp(rank, 1, m);
  return sorted[static_cast<size_t>(rank - 1)];
}

struct Resample {
  Eigen::VectorXd scores;
  SurvivalDataset data;
};

Resample draw_resample(const Eigen::VectorXd& scores, const SurvivalDataset& data, Rng& rng) {
  const int n = data.n();
  std::vector<int> rows(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) rows[static_cast<size_t>(i)] = rng.uniform_int(n);
  Eigen::VectorXd s(n);
  for (int i = 0; i < n; ++i) s(i) = scores(rows[static_cast<size_t>(i)]);
  return {std::move(s), data.subset(rows)};
}

}  // namespace

std::optional<double> auc_at_time(const Eigen::VectorXd& scores, const SurvivalDataset& data,
                                  double t) {
  if (scores.size() != data.n())
    throw std::invalid_argument("auc_at_time: score length does not match data");

  const StepSurvivalCurve censor_km = censoring_kaplan_meier(data);

  struct Control {
    double score;
    double weight;
  };
  std::vector<Control> controls;
  std::vector<std::pair<double, double>> cases;  // (score, weight)
  const double g_at_t = censor_km.survival_at(t);
  for (int i = 0; i < data.n(); ++i) {
    const auto& r = data.record(i);
    if (r.time <= t && r.event == 1) {
      const double g = censor_km.survival_before(r.time);
      if (g > 0.0) cases.push_back({scores(i), 1.0 / g});
    } else if (r.time > t) {
      if (g_at_t > 0.0) controls.push_back({scores(i), 1.0 / g_at_t});
    }
  }
  if (cases.empty() || controls.empty()) return std::nullopt;

  std::sort(controls.begin(), controls.end(),
            [](const Control& a, const Control& b) { return a.score < b.score; });
  std::vector<double> control_scores, cum_weight;
  control_scores.reserve(controls.size());
  cum_weight.reserve(controls.size());
  double running = 0.0;
  for (const auto& c : controls) {
    control_scores.push_back(c.score);
    running += c.weight;
    cum_weight.push_back(running);
  }
  const double total_control_weight = running;

  double numerator = 0.0, denominator = 0.0;
  for (const auto& [score, weight] : cases) {
    const auto lo = std::lower_bound(control_scores.begin(), control_scores.end(), score);
    const auto hi = std::upper_bound(control_scores.begin(), control_scores.end(), score);
    const double below = lo == control_scores.begin()
                             ? 0.0
                             : cum_weight[static_cast<size_t>(lo - control_scores.begin()) - 1];
    const double upto = hi == control_scores.begin()
                            ? 0.0
                            : cum_weight[static_cast<size_t>(hi - control_scores.begin()) - 1];
    numerator += weight * (below + 0.5 * (upto - below));
    denominator += weight * total_control_weight;
  }
  return numerator / denominator;
}

double integrated_auc(const Eigen::VectorXd& scores, const SurvivalDataset& data) {
  std::vector<double> grid;
  for (const auto& r : data.records()) {
    if (r.event == 1) grid.push_back(r.time);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return integrated_auc(scores, data, grid);
}

double integrated_auc(const Eigen::VectorXd& scores, const SurvivalDataset& data,
                      const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("integrated_auc: empty grid");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  const StepSurvivalCurve km = kaplan_meier(data);
  double previous_f = 0.0;
  double numerator = 0.0, mass = 0.0;
  bool any_defined = false;
  for (double t : sorted) {
    const double f = 1.0 - km.survival_at(t);
    const double df = f - previous_f;
    previous_f = f;
    const auto auc = auc_at_time(scores, data, t);
    if (!auc) continue;
    any_defined = true;
    numerator += *auc * df;
    mass += df;
  }
  if (!any_defined) throw std::runtime_error("curve defined nowhere");
  if (!(mass > 0.0)) throw std::runtime_error("integrated_auc: no event mass on the grid");
  return numerator / mass;
}

std::pair<double, double> bootstrap_ci(const Eigen::VectorXd& scores, const SurvivalDataset& data,
                                       const Metric& metric, int n_boot, double level,
                                       uint64_t seed) {
  if (data.n() < 10) throw std::invalid_argument("bootstrap_ci: need at least 10 subjects");
  if (n_boot < 1) throw std::invalid_argument("bootstrap_ci: need at least 1 replicate");
  if (!(level >= 0.0 && level < 1.0))
    throw std::invalid_argument("bootstrap_ci: level must lie in [0,1)");

  std::vector<double> values;
  int undefined = 0;
  for (int b = 0; b < n_boot; ++b) {
    Rng rng = Rng::derive(seed, "bootstrap", {static_cast<uint64_t>(b)});
    Resample rs = draw_resample(scores, data, rng);
    std::optional<double> v;
    try {
      v = metric(rs.scores, rs.data);
    } catch (const std::exception&) {
      v = std::nullopt;
    }
    if (v) values.push_back(*v);
    else ++undefined;
  }
  if (undefined * 2 > n_boot) throw std::runtime_error("unstable metric");
  std::sort(values.begin(), values.end());
  const double alpha = (1.0 - level) / 2.0;
  return {percentile(values, alpha), percentile(values, 1.0 - alpha)};
}

double EvaluationReport::mean_ci_width() const {
  if (auc_t.empty()) return 0.0;
  double total = 0.0;
  for (const auto& pt : auc_t) total += pt.ci_high - pt.ci_low;
  return total / static_cast<double>(auc_t.size());
}

std::string EvaluationReport::to_csv() const {
  std::string out = "t,auc,ci_low,ci_high\n";
  for (const auto& pt : auc_t) {
    out += format_double(pt.t) + "," + format_double(pt.auc) + "," + format_double(pt.ci_low) +
           "," + format_double(pt.ci_high) + "\n";
  }
  return out;
}

EvaluationReport evaluate_scores(const Eigen::VectorXd& scores, const SurvivalDataset& data,
                                 const std::vector<double>& t_grid,
                                 const EvaluateOptions& options) {
  EvaluationReport report;
  report.grid = t_grid;
  report.n_bootstrap = options.n_bootstrap;

  std::vector<std::pair<double, double>> points;  // (t, auc)
  for (double t : t_grid) {
    if (auto auc = auc_at_time(scores, data, t)) points.push_back({t, *auc});
  }
  report.iauc = integrated_auc(scores, data);

  // One resample set drives every interval.
  std::vector<std::vector<double>> auc_reps(points.size());
  std::vector<double> iauc_reps;
  int iauc_undefined = 0;
  for (int b = 0; b < options.n_bootstrap; ++b) {
    Rng rng = Rng::derive(options.seed, "bootstrap", {static_cast<uint64_t>(b)});
    Resample rs = draw_resample(scores, data, rng);
    for (size_t k = 0; k < points.size(); ++k) {
      if (auto auc = auc_at_time(rs.scores, rs.data, points[k].first))
        auc_reps[k].push_back(*auc);
    }
    try {
      iauc_reps.push_back(integrated_auc(rs.scores, rs.data));
    } catch (const std::exception&) {
      ++iauc_undefined;
    }
  }
  if (iauc_undefined * 2 > options.n_bootstrap) throw std::runtime_error("unstable metric");
  std::sort(iauc_reps.begin(), iauc_reps.end());
  const double alpha = (1.0 - options.level) / 2.0;
  report.iauc_ci_low = percentile(iauc_reps, alpha);
  report.iauc_ci_high = percentile(iauc_reps, 1.0 - alpha);

  for (size_t k = 0; k < points.size(); ++k) {
    if (static_cast<int>(auc_reps[k].size()) * 2 <= options.n_bootstrap) continue;  // gap
    std::sort(auc_reps[k].begin(), auc_reps[k].end());
    AucPoint pt;
    pt.t = points[k].first;
    pt.auc = points[k].second;
    pt.ci_low = percentile(auc_reps[k], alpha);
    pt.ci_high = percentile(auc_reps[k], 1.0 - alpha);
    report.auc_t.push_back(pt);
  }
  return report;
}

std::string ParsimonyCurve::to_csv() const {
  std::string out = "m,added_variable,psi";
  const size_t k_sites = points.empty() ? 0 : points.front().phi.size();
  for (size_t j = 0; j < k_sites; ++j) out += ",phi_site" + std::to_string(j + 1);
  out += "\n";
  for (const auto& pt : points) {
    out += std::to_string(pt.m) + "," + (pt.variables.empty() ? "" : pt.variables.back()) + "," +
           format_double(pt.psi);
    for (double phi : pt.phi) out += "," + format_double(phi);
    out += "\n";
  }
  return out;
}

ParsimonyCurve parsimony_curve(const std::vector<int>& global_ranks,
                               const std::vector<const SurvivalDataset*>& sites,
                               const SiteWeights& weights, const ModelFitter& fit_model,
                               const ParsimonyOptions& options) {
  if (sites.empty()) throw std::invalid_argument("parsimony_curve: no sites");
  const int k_sites = static_cast<int>(sites.size());
  if (weights.size() != k_sites)
    throw std::invalid_argument("parsimony_curve: weight count mismatch");
  const int p = sites.front()->p();
  if (static_cast<int>(global_ranks.size()) != p)
    throw std::invalid_argument("parsimony_curve: rank length mismatch");
  if (options.cv_folds < 2) throw std::invalid_argument("parsimony_curve: need >= 2 folds");

  // Variable indices in rank order.
  std::vector<int> by_rank(static_cast<size_t>(p), -1);
  for (int v = 0; v < p; ++v) {
    const int r = global_ranks[static_cast<size_t>(v)];
    if (r < 1 || r > p || by_rank[static_cast<size_t>(r - 1)] != -1)
      throw std::invalid_argument("parsimony_curve: ranks are not a permutation of 1..P");
    by_rank[static_cast<size_t>(r - 1)] = v;
  }

  // Event-stratified fold assignment, fixed across m.
  std::vector<std::vector<int>> fold_of(static_cast<size_t>(k_sites));
  for (int j = 0; j < k_sites; ++j) {
    const auto& site = *sites[static_cast<size_t>(j)];
    if (site.event_count() < options.cv_folds)
      throw std::invalid_argument("parsimony_curve: site " + std::to_string(j) +
                                  " has fewer events than folds");
    fold_of[static_cast<size_t>(j)].assign(static_cast<size_t>(site.n()), 0);
    Rng rng = Rng::derive(options.seed, "cv-folds", {static_cast<uint64_t>(j)});
    std::vector<int> events, censored;
    for (int i = 0; i < site.n(); ++i)
      (site.record(i).event == 1 ? events : censored).push_back(i);
    rng.shuffle(events);
    rng.shuffle(censored);
    for (size_t i = 0; i < events.size(); ++i)
      fold_of[static_cast<size_t>(j)][static_cast<size_t>(events[i])] =
          static_cast<int>(i) % options.cv_folds;
    for (size_t i = 0; i < censored.size(); ++i)
      fold_of[static_cast<size_t>(j)][static_cast<size_t>(censored[i])] =
          static_cast<int>(i) % options.cv_folds;
  }

  ParsimonyCurve curve;
  for (int m = 1; m <= p; ++m) {
    std::vector<int> vars(by_rank.begin(), by_rank.begin() + m);
    ParsimonyCurve::Point point;
    point.m = m;
    for (int v : vars)
      point.variables.push_back(sites.front()->variable_names()[static_cast<size_t>(v)]);

    std::vector<double> phi_sum(static_cast<size_t>(k_sites), 0.0);
    int usable_folds = 0;
    for (int f = 0; f < options.cv_folds; ++f) {
      try {
        std::vector<SurvivalDataset> train, validation;
        for (int j = 0; j < k_sites; ++j) {
          const auto& site = *sites[static_cast<size_t>(j)];
          std::vector<int> train_rows, val_rows;
          for (int i = 0; i < site.n(); ++i)
            (fold_of[static_cast<size_t>(j)][static_cast<size_t>(i)] == f ? val_rows : train_rows)
                .push_back(i);
          if (train_rows.empty() || val_rows.empty())
            throw std::runtime_error("empty fold split");
          SurvivalDataset train_j = site.subset(train_rows).select_variables(vars);
          if (train_j.event_count() == 0) throw std::runtime_error("zero events in fold");
          train.push_back(std::move(train_j));
          validation.push_back(site.subset(val_rows).select_variables(vars));
        }
        std::vector<const SurvivalDataset*> train_ptrs;
        for (const auto& t : train) train_ptrs.push_back(&t);
        const ScoringTable table = fit_model(train_ptrs);

        std::vector<double> fold_phi(static_cast<size_t>(k_sites));
        for (int j = 0; j < k_sites; ++j) {
          const Eigen::VectorXd val_scores =
              score_dataset(table, validation[static_cast<size_t>(j)]);
          fold_phi[static_cast<size_t>(j)] =
              integrated_auc(val_scores, validation[static_cast<size_t>(j)]);
        }
        for (int j = 0; j < k_sites; ++j) phi_sum[static_cast<size_t>(j)] += fold_phi[static_cast<size_t>(j)];
        ++usable_folds;
      } catch (const std::exception& e) {
        curve.warnings.push_back("m=" + std::to_string(m) + " fold " + std::to_string(f) +
                                 " skipped: " + e.what());
      }
    }
    if (usable_folds == 0)
      throw std::runtime_error("parsimony_curve: all folds failed at m=" + std::to_string(m) +
                               " (last: " + curve.warnings.back() + ")");

    point.phi.resize(static_cast<size_t>(k_sites));
    point.psi = 0.0;
    for (int j = 0; j < k_sites; ++j) {
      point.phi[static_cast<size_t>(j)] = phi_sum[static_cast<size_t>(j)] / usable_folds;
      point.psi += weights.weight(j) * point.phi[static_cast<size_t>(j)];
    }
    curve.points.push_back(std::move(point));
  }
  return curve;
}

ModelSelection select_model(const ParsimonyCurve& curve, int max_variables, double delta) {
  if (curve.points.empty()) throw std::invalid_argument("select_model: empty curve");
  if (max_variables < 1) throw std::invalid_argument("select_model: max_variables must be >= 1");

  std::vector<const ParsimonyCurve::Point*> eligible;
  for (const auto& pt : curve.points) {
    if (pt.m <= max_variables) eligible.push_back(&pt);
  }
  if (eligible.empty()) throw std::invalid_argument("select_model: no point within the cap");
  std::sort(eligible.begin(), eligible.end(),
            [](const auto* a, const auto* b) { return a->m < b->m; });

  double best = eligible.front()->psi;
  for (const auto* pt : eligible) best = std::max(best, pt->psi);
  for (const auto* pt : eligible) {
    if (pt->psi >= best - delta) return {pt->m, pt->variables};
  }
  return {eligible.back()->m, eligible.back()->variables};
}

}  // namespace fedsurv
