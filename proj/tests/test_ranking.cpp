#include "fedsurv/ranking.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace fedsurv;
using testutil::make_dataset;

namespace {

// Exponential survival with hazard multiplier exp(beta'x).
SurvivalDataset hazard_data(Rng& rng, int n, const Eigen::VectorXd& beta, double censor_prob) {
  const int p = static_cast<int>(beta.size());
  std::vector<double> times;
  std::vector<int> events;
  std::vector<std::vector<double>> cols(static_cast<size_t>(p));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(p);
    for (int k = 0; k < p; ++k) x(k) = rng.normal();
    for (int k = 0; k < p; ++k) cols[static_cast<size_t>(k)].push_back(x(k));
    const double t = rng.exponential(1.0) / std::exp(beta.dot(x));
    if (rng.bernoulli(censor_prob)) {
      times.push_back(t * rng.uniform());
      events.push_back(0);
    } else {
      times.push_back(t);
      events.push_back(1);
    }
  }
  return make_dataset(times, events, cols);
}

}  // namespace

TEST_CASE("site weights normalize and validate") {
  SiteWeights w({2.0, 6.0});
  CHECK(w.weight(0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(w.weight(1) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK_THROWS_AS(SiteWeights({1.0, -0.5}), std::invalid_argument);
  CHECK_THROWS_AS(SiteWeights({0.0, 0.0}), std::invalid_argument);
  auto s = SiteWeights::from_sample_sizes({100, 300});
  CHECK(s.weight(0) == doctest::Approx(0.25));
}

TEST_CASE("multicollinearity screen flags duplicates and anticorrelation") {
  Rng rng(3);
  std::vector<double> base;
  for (int i = 0; i < 50; ++i) base.push_back(rng.normal());
  std::vector<double> negated, noise;
  for (double v : base) negated.push_back(-v);
  for (int i = 0; i < 50; ++i) noise.push_back(rng.normal());
  std::vector<double> times(50, 1.0);
  std::vector<int> events(50, 1);

  auto data = make_dataset(times, events, {base, base, negated, noise},
                           {"a", "a_copy", "a_neg", "z"});
  auto report = multicollinearity_screen(data, 0.8);
  REQUIRE(report.pairs.size() == 3);  // (a,a_copy), (a,a_neg), (a_copy,a_neg)
  for (const auto& pr : report.pairs) CHECK(std::fabs(std::fabs(pr.r) - 1.0) < 1e-12);
  CHECK(report.pairs[0].first == 0);
  CHECK(report.degenerate.empty());
}

TEST_CASE("independent columns produce no flags") {
  Rng rng(11);
  const int n = 1000;
  std::vector<std::vector<double>> cols(4);
  for (auto& c : cols)
    for (int i = 0; i < n; ++i) c.push_back(rng.normal());
  std::vector<double> times(n, 1.0);
  std::vector<int> events(n, 1);
  auto report = multicollinearity_screen(make_dataset(times, events, cols), 0.8);
  CHECK(report.pairs.empty());
}

TEST_CASE("zero-variance column is flagged as degenerate") {
  auto data = make_dataset({1, 2, 3}, {1, 1, 1}, {{5, 5, 5}, {1, 2, 3}});
  auto report = multicollinearity_screen(data);
  REQUIRE(report.degenerate.size() == 1);
  CHECK(report.degenerate[0] == 0);
  CHECK(report.pairs.empty());
}

TEST_CASE("aggregate_ranks: single site is the identity") {
  VariableRanking r;
  r.site_id = 0;
  r.variable_names = {"a", "b", "c"};
  r.importance = Eigen::VectorXd::Zero(3);
  r.ranks = {2, 1, 3};
  auto global = aggregate_ranks({r}, SiteWeights({1.0}));
  CHECK(global == std::vector<int>{2, 1, 3});
}

TEST_CASE("aggregate_ranks: equal-weight tie prefers the first site's ordering") {
  VariableRanking r1, r2;
  r1.variable_names = r2.variable_names = {"a", "b", "c"};
  r1.importance = r2.importance = Eigen::VectorXd::Zero(3);
  r1.ranks = {1, 2, 3};
  r2.ranks = {2, 1, 3};
  // Weighted sums 1.5, 1.5, 3: tie between a and b resolved by site 1.
  auto global = aggregate_ranks({r1, r2}, SiteWeights({0.5, 0.5}));
  CHECK(global == std::vector<int>{1, 2, 3});
}

TEST_CASE("aggregate_ranks: weighting dominates the sum") {
  VariableRanking r1, r2;
  r1.variable_names = r2.variable_names = {"a", "b"};
  r1.importance = r2.importance = Eigen::VectorXd::Zero(2);
  r1.ranks = {2, 1};
  r2.ranks = {1, 2};
  // Sums: a = 1.9, b = 1.1 -> b first.
  auto global = aggregate_ranks({r1, r2}, SiteWeights({0.9, 0.1}));
  CHECK(global == std::vector<int>{2, 1});
}

TEST_CASE("aggregate_ranks rejects mismatched variable sets") {
  VariableRanking r1, r2;
  r1.variable_names = {"a", "b"};
  r2.variable_names = {"a", "c"};
  r1.importance = r2.importance = Eigen::VectorXd::Zero(2);
  r1.ranks = r2.ranks = {1, 2};
  CHECK_THROWS_AS(aggregate_ranks({r1, r2}, SiteWeights({0.5, 0.5})), std::invalid_argument);
}

TEST_CASE("aggregate_ranks output is a permutation; dominant weight recovers its site") {
  Rng rng(23);
  const int p = 7;
  for (int rep = 0; rep < 20; ++rep) {
    VariableRanking r1, r2;
    for (int k = 0; k < p; ++k) {
      r1.variable_names.push_back("v" + std::to_string(k));
    }
    r2.variable_names = r1.variable_names;
    r1.importance = r2.importance = Eigen::VectorXd::Zero(p);
    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 1);
    rng.shuffle(perm);
    r1.ranks = perm;
    rng.shuffle(perm);
    r2.ranks = perm;

    auto global = aggregate_ranks({r1, r2}, SiteWeights({0.3, 0.7}));
    std::vector<int> sorted = global;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < p; ++k) CHECK(sorted[static_cast<size_t>(k)] == k + 1);

    // As w_1 -> 1 the aggregate converges to site 1's ranking exactly.
    auto dominated = aggregate_ranks({r1, r2}, SiteWeights({0.999, 0.001}));
    CHECK(dominated == r1.ranks);
  }
}

TEST_CASE("rsf: single variable always ranks first") {
  Rng rng(41);
  Eigen::VectorXd beta(1);
  beta << 0.0;
  auto data = hazard_data(rng, 80, beta, 0.2);
  RsfConfig cfg;
  cfg.n_trees = 25;
  cfg.seed = 9;
  auto ranking = rsf_importance(data, cfg);
  CHECK(ranking.ranks == std::vector<int>{1});
}

TEST_CASE("rsf importance is deterministic for a fixed seed") {
  Rng rng(55);
  Eigen::VectorXd beta(3);
  beta << 0.8, 0.0, -0.5;
  auto data = hazard_data(rng, 150, beta, 0.25);
  RsfConfig cfg;
  cfg.n_trees = 60;
  cfg.seed = 1234;
  auto r1 = rsf_importance(data, cfg);
  auto r2 = rsf_importance(data, cfg);
  CHECK(r1.ranks == r2.ranks);
  for (int k = 0; k < 3; ++k) CHECK(r1.importance(k) == r2.importance(k));  // bit-for-bit
}

TEST_CASE("rsf is invariant to record order") {
  Rng rng(56);
  Eigen::VectorXd beta(3);
  beta << 1.0, 0.0, 0.0;
  auto data = hazard_data(rng, 120, beta, 0.2);
  RsfConfig cfg;
  cfg.n_trees = 40;
  cfg.seed = 77;
  auto base = rsf_importance(data, cfg);

  std::vector<int> rows(static_cast<size_t>(data.n()));
  std::iota(rows.begin(), rows.end(), 0);
  Rng shuffler(8);
  shuffler.shuffle(rows);
  auto shuffled = rsf_importance(data.subset(rows), cfg);
  CHECK(base.ranks == shuffled.ranks);
  for (int k = 0; k < 3; ++k) CHECK(base.importance(k) == shuffled.importance(k));
}

TEST_CASE("rsf: pure noise variables have importance near zero") {
  Rng rng(105);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(5);
  auto data = hazard_data(rng, 300, beta, 0.2);
  RsfConfig cfg;
  cfg.n_trees = 500;
  cfg.seed = 5150;
  auto ranking = rsf_importance(data, cfg);
  for (int k = 0; k < 5; ++k) CHECK(std::fabs(ranking.importance(k)) <= 0.02);
}

TEST_CASE("rsf: a strong signal variable is ranked first") {
  Rng rng(61);
  Eigen::VectorXd beta(5);
  beta << 1.5, 0.0, 0.0, 0.0, 0.0;
  auto data = hazard_data(rng, 500, beta, 0.2);
  RsfConfig cfg;
  cfg.n_trees = 300;
  cfg.seed = 99;
  auto ranking = rsf_importance(data, cfg);
  CHECK(ranking.ranks[0] == 1);
  CHECK(ranking.importance(0) > 0.05);
}

TEST_CASE("rsf: all-stump forest is reported as degenerate") {
  // 10 records and 2 events cannot satisfy the node-size floors.
  auto data = make_dataset({1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
                           {1, 1, 0, 0, 0, 0, 0, 0, 0, 0},
                           {{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}});
  RsfConfig cfg;
  cfg.n_trees = 10;
  cfg.seed = 3;
  CHECK_THROWS_WITH_AS(rsf_importance(data, cfg), "degenerate forest", std::runtime_error);
}

TEST_CASE("ranking CSV export") {
  VariableRanking r;
  r.variable_names = {"age", "pulse"};
  r.importance = Eigen::VectorXd(2);
  r.importance << 0.125, -0.25;
  r.ranks = {1, 2};
  CHECK(ranking_to_csv(r) == "variable,vimp,rank\nage,0.125,1\npulse,-0.25,2\n");
}
