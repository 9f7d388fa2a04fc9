#include "fedsurv/ranking.hpp"

#include "fedsurv/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace fedsurv {

SiteWeights::SiteWeights(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw std::invalid_argument("SiteWeights: no weights");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("SiteWeights: weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("SiteWeights: weights sum to zero");
  for (double& w : weights_) w /= total;
}

SiteWeights SiteWeights::from_sample_sizes(const std::vector<int>& sizes) {
  std::vector<double> w;
  w.reserve(sizes.size());
  for (int s : sizes) {
    if (s < 1) throw std::invalid_argument("SiteWeights: sample sizes must be >= 1");
    w.push_back(static_cast<double>(s));
  }
  return SiteWeights(std::move(w));
}

CollinearityReport multicollinearity_screen(const SurvivalDataset& data, double threshold) {
  const int p = data.p();
  if (p < 2) throw std::invalid_argument("multicollinearity_screen: need at least 2 variables");
  const int n = data.n();

  std::vector<Eigen::VectorXd> cols(static_cast<size_t>(p));
  std::vector<double> mean(static_cast<size_t>(p)), sd(static_cast<size_t>(p));
  CollinearityReport report;
  for (int k = 0; k < p; ++k) {
    cols[static_cast<size_t>(k)] = data.column(k);
    mean[static_cast<size_t>(k)] = cols[static_cast<size_t>(k)].mean();
    const double var =
        (cols[static_cast<size_t>(k)].array() - mean[static_cast<size_t>(k)]).square().sum() / n;
    sd[static_cast<size_t>(k)] = std::sqrt(var);
    if (cols[static_cast<size_t>(k)].maxCoeff() == cols[static_cast<size_t>(k)].minCoeff())
      report.degenerate.push_back(k);
  }

  auto is_degenerate = [&](int k) {
    return std::find(report.degenerate.begin(), report.degenerate.end(), k) !=
           report.degenerate.end();
  };
  for (int i = 0; i < p; ++i) {
    if (is_degenerate(i)) continue;
    for (int j = i + 1; j < p; ++j) {
      if (is_degenerate(j)) continue;
      const double cov = ((cols[static_cast<size_t>(i)].array() - mean[static_cast<size_t>(i)]) *
                          (cols[static_cast<size_t>(j)].array() - mean[static_cast<size_t>(j)]))
                             .sum() /
                         n;
      const double r = cov / (sd[static_cast<size_t>(i)] * sd[static_cast<size_t>(j)]);
      if (std::fabs(r) > threshold) report.pairs.push_back({i, j, r});
    }
  }
  std::stable_sort(report.pairs.begin(), report.pairs.end(),
                   [](const CollinearPair& a, const CollinearPair& b) {
                     return std::fabs(a.r) > std::fabs(b.r);
                   });
  return report;
}

namespace {

struct ForestData {
  int n = 0;
  int p = 0;
  std::vector<double> time;   // canonical order
  std::vector<int> event;
  Eigen::MatrixXd x;          // n rows, p columns, canonical order
  std::vector<double> grid;   // unique event times, ascending
};

// Canonical record ordering: lexicographic over (time, event,
// covariates, site_id). Bootstrap draws index into this ordering, so
// shuffling the input rows cannot change the forest.
ForestData canonicalize(const SurvivalDataset& data) {
  const int n = data.n();
  const int p = data.p();
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ra = data.record(a);
    const auto& rb = data.record(b);
    if (ra.time != rb.time) return ra.time < rb.time;
    if (ra.event != rb.event) return ra.event < rb.event;
    for (int k = 0; k < p; ++k) {
      if (ra.covariates(k) != rb.covariates(k)) return ra.covariates(k) < rb.covariates(k);
    }
    return ra.site_id < rb.site_id;
  });

  ForestData f;
  f.n = n;
  f.p = p;
  f.time.resize(static_cast<size_t>(n));
  f.event.resize(static_cast<size_t>(n));
  f.x.resize(n, p);
  for (int i = 0; i < n; ++i) {
    const auto& r = data.record(order[static_cast<size_t>(i)]);
    f.time[static_cast<size_t>(i)] = r.time;
    f.event[static_cast<size_t>(i)] = r.event;
    f.x.row(i) = r.covariates.transpose();
  }
  for (int i = 0; i < n; ++i) {
    if (f.event[static_cast<size_t>(i)] == 1) f.grid.push_back(f.time[static_cast<size_t>(i)]);
  }
  std::sort(f.grid.begin(), f.grid.end());
  f.grid.erase(std::unique(f.grid.begin(), f.grid.end()), f.grid.end());
  return f;
}

struct TreeNode {
  int var = -1;
  double cut = 0.0;
  int left = -1;
  int right = -1;
  double mortality = 0.0;  // leaf: node CHF summed over the time grid
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<int> oob;  // canonical indices, ascending
};

struct SplitChoice {
  int var = -1;
  double cut = 0.0;
  double statistic = -1.0;
};

// Two-sample log-rank statistic for a candidate split, walked over the
// node's time-sorted members. Returns -1 for invalid candidates.
double split_statistic(const ForestData& f, const std::vector<int>& members_by_time,
                       const std::vector<char>& goes_left, int min_node_size,
                       int min_node_events) {
  const int m = static_cast<int>(members_by_time.size());
  int left_count = 0, left_events = 0, total_events = 0;
  for (int i = 0; i < m; ++i) {
    const int r = members_by_time[static_cast<size_t>(i)];
    total_events += f.event[static_cast<size_t>(r)];
    if (goes_left[static_cast<size_t>(i)]) {
      ++left_count;
      left_events += f.event[static_cast<size_t>(r)];
    }
  }
  const int right_count = m - left_count;
  const int right_events = total_events - left_events;
  if (left_count < min_node_size || right_count < min_node_size) return -1.0;
  if (left_events < min_node_events || right_events < min_node_events) return -1.0;

  double observed = 0.0, expected = 0.0, variance = 0.0;
  double n_rem = m, l_rem = left_count;
  int i = 0;
  while (i < m) {
    const double t = f.time[static_cast<size_t>(members_by_time[static_cast<size_t>(i)])];
    int d = 0, d_left = 0, leaving = 0, leaving_left = 0;
    while (i < m && f.time[static_cast<size_t>(members_by_time[static_cast<size_t>(i)])] == t) {
      const int r = members_by_time[static_cast<size_t>(i)];
      d += f.event[static_cast<size_t>(r)];
      ++leaving;
      if (goes_left[static_cast<size_t>(i)]) {
        d_left += f.event[static_cast<size_t>(r)];
        ++leaving_left;
      }
      ++i;
    }
    if (d > 0) {
      const double frac = l_rem / n_rem;
      observed += d_left;
      expected += d * frac;
      if (n_rem > 1.0)
        variance += d * frac * (1.0 - frac) * (n_rem - d) / (n_rem - 1.0);
    }
    n_rem -= leaving;
    l_rem -= leaving_left;
  }
  if (variance <= 1e-12) return -1.0;
  const double diff = observed - expected;
  return diff * diff / variance;
}

class ForestBuilder {
 public:
  ForestBuilder(const ForestData& f, const RsfConfig& cfg) : f_(f), cfg_(cfg) {
    mtry_ = cfg.mtry > 0 ? std::min(cfg.mtry, f.p)
                         : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(f.p))));
  }

  Tree build(int tree_index) {
    Rng rng = Rng::derive(cfg_.seed, "rsf-tree", {static_cast<uint64_t>(tree_index)});
    std::vector<char> inbag(static_cast<size_t>(f_.n), 0);
    std::vector<int> members(static_cast<size_t>(f_.n));
    for (int i = 0; i < f_.n; ++i) {
      const int draw = rng.uniform_int(f_.n);
      members[static_cast<size_t>(i)] = draw;
      inbag[static_cast<size_t>(draw)] = 1;
    }
    std::sort(members.begin(), members.end());

    Tree tree;
    for (int i = 0; i < f_.n; ++i) {
      if (!inbag[static_cast<size_t>(i)]) tree.oob.push_back(i);
    }
    grow(tree, members, rng);
    return tree;
  }

  double predict(const Tree& tree, int subject, int override_var, double override_value) const {
    int node = 0;
    while (tree.nodes[static_cast<size_t>(node)].var >= 0) {
      const TreeNode& nd = tree.nodes[static_cast<size_t>(node)];
      const double v = nd.var == override_var ? override_value : f_.x(subject, nd.var);
      node = v < nd.cut ? nd.left : nd.right;
    }
    return tree.nodes[static_cast<size_t>(node)].mortality;
  }

 private:
  int grow(Tree& tree, const std::vector<int>& members, Rng& rng) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    SplitChoice best;
    const int m = static_cast<int>(members.size());
    int node_events = 0;
    for (int r : members) node_events += f_.event[static_cast<size_t>(r)];

    if (m >= 2 * cfg_.min_node_size && node_events >= 2 * cfg_.min_node_events) {
      std::vector<int> by_time = members;
      std::stable_sort(by_time.begin(), by_time.end(), [&](int a, int b) {
        return f_.time[static_cast<size_t>(a)] < f_.time[static_cast<size_t>(b)];
      });
      best = find_best_split(by_time, rng);
      if (best.var >= 0) {
        std::vector<int> left, right;
        for (int r : members) {
          (f_.x(r, best.var) < best.cut ? left : right).push_back(r);
        }
        tree.nodes[static_cast<size_t>(node_id)].var = best.var;
        tree.nodes[static_cast<size_t>(node_id)].cut = best.cut;
        const int left_id = grow(tree, left, rng);
        const int right_id = grow(tree, right, rng);
        tree.nodes[static_cast<size_t>(node_id)].left = left_id;
        tree.nodes[static_cast<size_t>(node_id)].right = right_id;
        return node_id;
      }
    }

    tree.nodes[static_cast<size_t>(node_id)].mortality = leaf_mortality(members);
    return node_id;
  }

  SplitChoice find_best_split(const std::vector<int>& by_time, Rng& rng) {
    // Partial Fisher-Yates for the mtry candidate variables, then
    // ascending order so ties resolve deterministically.
    std::vector<int> pool(static_cast<size_t>(f_.p));
    std::iota(pool.begin(), pool.end(), 0);
    for (int j = 0; j < mtry_; ++j) {
      const int pick = j + rng.uniform_int(f_.p - j);
      std::swap(pool[static_cast<size_t>(j)], pool[static_cast<size_t>(pick)]);
    }
    std::vector<int> candidates(pool.begin(), pool.begin() + mtry_);
    std::sort(candidates.begin(), candidates.end());

    const int m = static_cast<int>(by_time.size());
    SplitChoice best;
    std::vector<char> goes_left(static_cast<size_t>(m));
    for (int var : candidates) {
      std::vector<double> values;
      values.reserve(static_cast<size_t>(m));
      for (int r : by_time) values.push_back(f_.x(r, var));
      std::vector<double> distinct = values;
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      if (distinct.size() < 2) continue;

      std::vector<double> cuts;
      const size_t q = distinct.size() - 1;
      if (q <= static_cast<size_t>(cfg_.max_cutpoints)) {
        for (size_t i = 0; i < q; ++i) cuts.push_back(0.5 * (distinct[i] + distinct[i + 1]));
      } else {
        for (int i = 0; i < cfg_.max_cutpoints; ++i) {
          const size_t at = static_cast<size_t>((static_cast<double>(i) + 0.5) *
                                                static_cast<double>(q) / cfg_.max_cutpoints);
          cuts.push_back(0.5 * (distinct[at] + distinct[at + 1]));
        }
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      }

      for (double cut : cuts) {
        for (int i = 0; i < m; ++i)
          goes_left[static_cast<size_t>(i)] = values[static_cast<size_t>(i)] < cut ? 1 : 0;
        const double stat = split_statistic(f_, by_time, goes_left, cfg_.min_node_size,
                                            cfg_.min_node_events);
        if (stat > best.statistic) {
          best.statistic = stat;
          best.var = var;
          best.cut = cut;
        }
      }
    }
    return best;
  }

  // Nelson-Aalen over the node members, summed across the forest grid.
  double leaf_mortality(const std::vector<int>& members) const {
    std::vector<int> by_time = members;
    std::sort(by_time.begin(), by_time.end(), [&](int a, int b) {
      return f_.time[static_cast<size_t>(a)] < f_.time[static_cast<size_t>(b)];
    });
    const int m = static_cast<int>(by_time.size());
    double mortality = 0.0;
    int remaining = m;
    int i = 0;
    while (i < m) {
      const double t = f_.time[static_cast<size_t>(by_time[static_cast<size_t>(i)])];
      int d = 0, leaving = 0;
      while (i < m && f_.time[static_cast<size_t>(by_time[static_cast<size_t>(i)])] == t) {
        d += f_.event[static_cast<size_t>(by_time[static_cast<size_t>(i)])];
        ++leaving;
        ++i;
      }
      if (d > 0) {
        const auto weight = f_.grid.end() - std::lower_bound(f_.grid.begin(), f_.grid.end(), t);
        mortality += (static_cast<double>(d) / remaining) * static_cast<double>(weight);
      }
      remaining -= leaving;
    }
    return mortality;
  }

  const ForestData& f_;
  const RsfConfig& cfg_;
  int mtry_ = 0;
};

double harrell_c(const ForestData& f, const std::vector<double>& risk,
                 const std::vector<char>& usable) {
  double concordant = 0.0, comparable = 0.0;
  for (int i = 0; i < f.n; ++i) {
    if (!usable[static_cast<size_t>(i)] || f.event[static_cast<size_t>(i)] != 1) continue;
    for (int j = 0; j < f.n; ++j) {
      if (!usable[static_cast<size_t>(j)] || j == i) continue;
      if (f.time[static_cast<size_t>(i)] >= f.time[static_cast<size_t>(j)]) continue;
      comparable += 1.0;
      if (risk[static_cast<size_t>(i)] > risk[static_cast<size_t>(j)]) concordant += 1.0;
      else if (risk[static_cast<size_t>(i)] == risk[static_cast<size_t>(j)]) concordant += 0.5;
    }
  }
  return comparable > 0.0 ? concordant / comparable : 0.5;
}

}  // namespace

VariableRanking rsf_importance(const SurvivalDataset& data, const RsfConfig& config) {
  if (data.event_count() < 2)
    throw std::invalid_argument("rsf_importance: need at least 2 events");
  if (config.n_trees < 1) throw std::invalid_argument("rsf_importance: n_trees must be >= 1");

  const ForestData f = canonicalize(data);
  ForestBuilder builder(f, config);

  std::vector<Tree> trees;
  trees.reserve(static_cast<size_t>(config.n_trees));
  int stumps = 0;
  for (int t = 0; t < config.n_trees; ++t) {
    trees.push_back(builder.build(t));
    if (trees.back().nodes.size() == 1) ++stumps;
  }
  if (stumps == config.n_trees) throw std::runtime_error("degenerate forest");

  // Base out-of-bag ensemble mortality.
  const size_t np = static_cast<size_t>(f.n);
  std::vector<double> base_sum(np, 0.0);
  std::vector<int> oob_count(np, 0);
  for (const Tree& tree : trees) {
    for (int i : tree.oob) {
      base_sum[static_cast<size_t>(i)] += builder.predict(tree, i, -1, 0.0);
      ++oob_count[static_cast<size_t>(i)];
    }
  }
  std::vector<char> usable(np, 0);
  std::vector<double> base_risk(np, 0.0);
  for (int i = 0; i < f.n; ++i) {
    if (oob_count[static_cast<size_t>(i)] > 0) {
      usable[static_cast<size_t>(i)] = 1;
      base_risk[static_cast<size_t>(i)] =
          base_sum[static_cast<size_t>(i)] / oob_count[static_cast<size_t>(i)];
    }
  }
  const double base_error = 1.0 - harrell_c(f, base_risk, usable);

  VariableRanking ranking;
  ranking.site_id = data.record(0).site_id;
  ranking.variable_names = data.variable_names();
  ranking.importance = Eigen::VectorXd::Zero(f.p);

  for (int k = 0; k < f.p; ++k) {
    std::vector<double> perm_sum(np, 0.0);
    for (size_t t = 0; t < trees.size(); ++t) {
      const Tree& tree = trees[t];
      if (tree.oob.empty()) continue;
      Rng rng = Rng::derive(config.seed, "rsf-vimp",
                            {static_cast<uint64_t>(t), static_cast<uint64_t>(k)});
      std::vector<int> shuffled = tree.oob;
      rng.shuffle(shuffled);
      for (size_t j = 0; j < tree.oob.size(); ++j) {
        const int i = tree.oob[j];
        const double value = f.x(shuffled[j], k);
        perm_sum[static_cast<size_t>(i)] += builder.predict(tree, i, k, value);
      }
    }
    std::vector<double> perm_risk(np, 0.0);
    for (int i = 0; i < f.n; ++i) {
      if (usable[static_cast<size_t>(i)])
        perm_risk[static_cast<size_t>(i)] =
            perm_sum[static_cast<size_t>(i)] / oob_count[static_cast<size_t>(i)];
    }
    ranking.importance(k) = (1.0 - harrell_c(f, perm_risk, usable)) - base_error;
  }

  // Ranks by descending importance, ingestion order on ties.
  std::vector<int> order(static_cast<size_t>(f.p));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return ranking.importance(a) > ranking.importance(b);
  });
  ranking.ranks.assign(static_cast<size_t>(f.p), 0);
  for (int pos = 0; pos < f.p; ++pos) ranking.ranks[static_cast<size_t>(order[static_cast<size_t>(pos)])] = pos + 1;
  return ranking;
}

std::vector<int> aggregate_ranks(const std::vector<VariableRanking>& local,
                                 const SiteWeights& weights) {
  if (local.empty()) throw std::invalid_argument("aggregate_ranks: no rankings");
  if (weights.size() != static_cast<int>(local.size()))
    throw std::invalid_argument("aggregate_ranks: weight count mismatch");
  const size_t p = local.front().variable_names.size();
  for (const auto& r : local) {
    if (r.variable_names != local.front().variable_names)
      throw std::invalid_argument("aggregate_ranks: mismatched variable sets");
    if (r.ranks.size() != p) throw std::invalid_argument("aggregate_ranks: rank length mismatch");
    std::vector<char> seen(p + 1, 0);
    for (int q : r.ranks) {
      if (q < 1 || q > static_cast<int>(p) || seen[static_cast<size_t>(q)])
        throw std::invalid_argument("aggregate_ranks: ranks are not a permutation of 1..P");
      seen[static_cast<size_t>(q)] = 1;
    }
  }

  int top_site = 0;
  for (int j = 1; j < weights.size(); ++j) {
    if (weights.weight(j) > weights.weight(top_site)) top_site = j;
  }

  std::vector<double> sums(p, 0.0);
  for (size_t j = 0; j < local.size(); ++j) {
    for (size_t k = 0; k < p; ++k)
      sums[k] += weights.weight(static_cast<int>(j)) * local[j].ranks[k];
  }

  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (sums[static_cast<size_t>(a)] != sums[static_cast<size_t>(b)])
      return sums[static_cast<size_t>(a)] < sums[static_cast<size_t>(b)];
    const int ra = local[static_cast<size_t>(top_site)].ranks[static_cast<size_t>(a)];
    const int rb = local[static_cast<size_t>(top_site)].ranks[static_cast<size_t>(b)];
    if (ra != rb) return ra < rb;
    return a < b;
  });

  std::vector<int> global(p, 0);
  for (size_t pos = 0; pos < p; ++pos) global[static_cast<size_t>(order[pos])] = static_cast<int>(pos) + 1;
  return global;
}

std::string ranking_to_csv(const VariableRanking& ranking) {
  std::string out = "variable,vimp,rank\n";
  char buf[64];
  for (size_t k = 0; k < ranking.variable_names.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.12g", ranking.importance(static_cast<Eigen::Index>(k)));
    out += ranking.variable_names[k] + "," + buf + "," + std::to_string(ranking.ranks[k]) + "\n";
  }
  return out;
}

}  // namespace fedsurv
