#include "fedsurv/evaluation.hpp"

#include "fedsurv/cox.hpp"
#include "fedsurv/odach.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace fedsurv;
using testutil::make_dataset;

namespace {

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

// Exhaustive case-control pair counting, no weighting: the oracle on
// uncensored data.
double pair_count_auc(const Eigen::VectorXd& scores, const SurvivalDataset& data, double t) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    if (!(data.record(i).time <= t && data.record(i).event == 1)) continue;
    for (int j = 0; j < data.n(); ++j) {
      if (!(data.record(j).time > t)) continue;
      den += 1.0;
      if (scores(i) > scores(j)) num += 1.0;
      else if (scores(i) == scores(j)) num += 0.5;
    }
  }
  return num / den;
}

}  // namespace

TEST_CASE("auc_at_time: perfect separation, ties, and the 0.5 pair example") {
  auto data = make_dataset({1, 2, 10, 11}, {1, 1, 0, 0});
  CHECK(*auc_at_time(to_vec({9, 8, 1, 0}), data, 5.0) == doctest::Approx(1.0));
  CHECK(*auc_at_time(to_vec({3, 3, 3, 3}), data, 5.0) == doctest::Approx(0.5));

  // Cases score {3, 1}, control {2}: one win, one loss.
  auto small = make_dataset({1, 2, 9}, {1, 1, 0});
  CHECK(*auc_at_time(to_vec({3, 1, 2}), small, 5.0) == doctest::Approx(0.5));
}

TEST_CASE("auc_at_time is a gap without cases or controls") {
  auto data = make_dataset({1, 2, 3}, {0, 0, 1});
  CHECK(!auc_at_time(to_vec({1, 2, 3}), data, 0.5));   // no cases yet
  CHECK(!auc_at_time(to_vec({1, 2, 3}), data, 10.0));  // nobody beyond t
}

TEST_CASE("auc_at_time equals exhaustive pair counting on uncensored data") {
  Rng rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 5 + rng.uniform_int(16);
    std::vector<double> times, scores;
    std::vector<int> events;
    for (int i = 0; i < n; ++i) {
      times.push_back(rng.exponential(0.5));
      events.push_back(1);
      scores.push_back(static_cast<double>(rng.uniform_int(6)));  // force ties
    }
    auto data = make_dataset(times, events);
    std::vector<double> sorted_times = times;
    std::sort(sorted_times.begin(), sorted_times.end());
    const double t = sorted_times[static_cast<size_t>(n / 2)];
    const auto fast = auc_at_time(to_vec(scores), data, t);
    if (!fast) continue;
    CHECK(*fast == doctest::Approx(pair_count_auc(to_vec(scores), data, t)).epsilon(1e-12));
  }
}

TEST_CASE("auc_at_time is invariant under strictly increasing score transforms") {
  Rng rng(13);
  auto data = testutil::random_dataset(rng, 60, 0, 0.3);
  Eigen::VectorXd scores(60);
  for (int i = 0; i < 60; ++i) scores(i) = rng.normal();
  Eigen::VectorXd warped = (scores.array() / 3.0).exp();
  const double t = data.record(10).time;
  auto a = auc_at_time(scores, data, t);
  auto b = auc_at_time(warped, data, t);
  REQUIRE(a.has_value());
  CHECK(*a == doctest::Approx(*b).epsilon(1e-12));
}

TEST_CASE("integrated_auc: hand-weighted two-point grid") {
  // Events at t=1,2; censored at 3,4. KM jumps 0.25 at both event
  // times, so the weights are equal. AUC(1)=1, AUC(2)=0.625.
  auto data = make_dataset({1, 2, 3, 4}, {1, 1, 0, 0});
  const auto scores = to_vec({10, 0, 1, 0});
  CHECK(*auc_at_time(scores, data, 1.0) == doctest::Approx(1.0));
  CHECK(*auc_at_time(scores, data, 2.0) == doctest::Approx(0.625));
  CHECK(integrated_auc(scores, data) == doctest::Approx(0.8125).epsilon(1e-12));
}

TEST_CASE("integrated_auc: constant curve integrates to itself") {
  Rng rng(17);
  auto data = testutil::random_dataset(rng, 50, 0, 0.3);
  Eigen::VectorXd scores(50);
  for (int i = 0; i < 50; ++i) scores(i) = 3.0;  // all ties: AUC(t) = 0.5 everywhere
  CHECK(integrated_auc(scores, data) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("integrated_auc: one usable grid point is that point's AUC") {
  auto data = make_dataset({1, 2}, {1, 1});
  const auto scores = to_vec({5, 1});
  // AUC(2) has no controls; only AUC(1) contributes.
  CHECK(integrated_auc(scores, data) == doctest::Approx(1.0));
}

TEST_CASE("integrated_auc reports an undefined curve") {
  auto data = make_dataset({1, 1}, {1, 1});
  CHECK_THROWS_WITH_AS(integrated_auc(to_vec({1, 2}), data), "curve defined nowhere",
                       std::runtime_error);
}

TEST_CASE("bootstrap_ci: constant metric collapses, level 0 degenerates to the median") {
  Rng rng(19);
  auto data = testutil::random_dataset(rng, 40, 0, 0.3);
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(40);

  auto constant = [](const Eigen::VectorXd&, const SurvivalDataset&) {
    return std::optional<double>(0.7);
  };
  auto ci = bootstrap_ci(scores, data, constant, 100, 0.95, 5);
  CHECK(ci.first == 0.7);
  CHECK(ci.second == 0.7);

  int counter = 0;
  auto varying = [&counter](const Eigen::VectorXd&, const SurvivalDataset&) {
    return std::optional<double>(static_cast<double>(counter++ % 10));
  };
  auto degenerate = bootstrap_ci(scores, data, varying, 100, 0.0, 5);
  CHECK(degenerate.first == degenerate.second);
}

TEST_CASE("bootstrap_ci is deterministic and flags unstable metrics") {
  Rng rng(23);
  auto data = testutil::random_dataset(rng, 50, 0, 0.4);
  Eigen::VectorXd scores(50);
  for (int i = 0; i < 50; ++i) scores(i) = rng.normal();

  auto metric = [](const Eigen::VectorXd& s, const SurvivalDataset& d) {
    return std::optional<double>(integrated_auc(s, d));
  };
  auto a = bootstrap_ci(scores, data, metric, 60, 0.95, 99);
  auto b = bootstrap_ci(scores, data, metric, 60, 0.95, 99);
  CHECK(a.first == b.first);    // bit-for-bit
  CHECK(a.second == b.second);

  int calls = 0;
  auto flaky = [&calls](const Eigen::VectorXd&, const SurvivalDataset&) {
    return (calls++ % 3 == 0) ? std::optional<double>(0.5) : std::nullopt;
  };
  CHECK_THROWS_WITH_AS(bootstrap_ci(scores, data, flaky, 60, 0.95, 1), "unstable metric",
                       std::runtime_error);
}

TEST_CASE("evaluate_scores produces a coherent deterministic report") {
  Rng rng(29);
  Eigen::VectorXd beta(2);
  beta << 0.9, -0.5;
  std::vector<double> times;
  std::vector<int> events;
  std::vector<std::vector<double>> cols(2);
  for (int i = 0; i < 150; ++i) {
    Eigen::VectorXd x(2);
    x << rng.normal(), rng.normal();
    cols[0].push_back(x(0));
    cols[1].push_back(x(1));
    const double t = rng.exponential(0.05) / std::exp(beta.dot(x));
    times.push_back(std::min(t, 30.0));
    events.push_back(t <= 30.0 ? 1 : 0);
  }
  auto data = make_dataset(times, events, cols);
  Eigen::VectorXd scores(150);
  for (int i = 0; i < 150; ++i) scores(i) = beta.dot(data.record(i).covariates);

  std::vector<double> grid;
  for (int t = 1; t <= 30; ++t) grid.push_back(t);
  EvaluateOptions opts;
  opts.n_bootstrap = 80;
  opts.seed = 7;
  auto report = evaluate_scores(scores, data, grid, opts);

  CHECK(!report.auc_t.empty());
  for (const auto& pt : report.auc_t) {
    CHECK(pt.auc >= 0.0);
    CHECK(pt.auc <= 1.0);
    CHECK(pt.ci_low <= pt.ci_high);
    CHECK(pt.ci_low >= 0.0);
    CHECK(pt.ci_high <= 1.0);
  }
  CHECK(report.iauc > 0.5);  // informative scores
  CHECK(report.iauc_ci_low <= report.iauc_ci_high);

  auto again = evaluate_scores(scores, data, grid, opts);
  CHECK(report.to_csv() == again.to_csv());
  CHECK(report.iauc_ci_low == again.iauc_ci_low);

  const std::string csv = report.to_csv();
  CHECK(csv.find("t,auc,ci_low,ci_high\n") == 0);
}

TEST_CASE("select_model: documented rule applications") {
  ParsimonyCurve curve;
  const std::vector<double> psis = {0.70, 0.80, 0.805, 0.806};
  for (int m = 1; m <= 4; ++m) {
    ParsimonyCurve::Point pt;
    pt.m = m;
    pt.psi = psis[static_cast<size_t>(m - 1)];
    for (int v = 0; v < m; ++v) pt.variables.push_back("v" + std::to_string(v + 1));
    curve.points.push_back(pt);
  }
  // Stored verbatim.
  for (int m = 1; m <= 4; ++m)
    CHECK(curve.points[static_cast<size_t>(m - 1)].psi == psis[static_cast<size_t>(m - 1)]);

  auto pick = select_model(curve, 10, 0.01);
  CHECK(pick.d == 2);
  CHECK(pick.variables == std::vector<std::string>{"v1", "v2"});

  CHECK(select_model(curve, 1, 0.01).d == 1);  // cap binds

  ParsimonyCurve decreasing;
  for (int m = 1; m <= 3; ++m) {
    ParsimonyCurve::Point pt;
    pt.m = m;
    pt.psi = 0.9 - 0.1 * m;
    pt.variables.assign(static_cast<size_t>(m), "v");
    decreasing.points.push_back(pt);
  }
  CHECK(select_model(decreasing, 10, 0.01).d == 1);

  // delta = 0 picks the smallest argmax.
  CHECK(select_model(curve, 10, 0.0).d == 4);
  CHECK(select_model(curve, 3, 0.0).d == 3);
}

TEST_CASE("parsimony_curve: fold mechanics with a pass-through fitter") {
  Rng rng(31);
  Eigen::VectorXd beta(2);
  beta << 1.2, 0.0;
  std::vector<double> times;
  std::vector<int> events;
  std::vector<std::vector<double>> cols(2);
  for (int i = 0; i < 120; ++i) {
    Eigen::VectorXd x(2);
    x << rng.normal(), rng.normal();
    cols[0].push_back(x(0));
    cols[1].push_back(x(1));
    times.push_back(rng.exponential(1.0) / std::exp(beta.dot(x)));
    events.push_back(rng.bernoulli(0.15) ? 0 : 1);
  }
  auto site = make_dataset(times, events, cols);

  // The real federated fitter, single site.
  auto fitter = [](const std::vector<const SurvivalDataset*>& train) {
    std::vector<std::vector<double>> cuts;
    for (int k = 0; k < train.front()->p(); ++k)
      cuts.push_back(local_quantile_cutoffs(*train.front(), k).cutoffs);
    auto design = categorize(*train.front(), build_scheme(*train.front(), cuts));
    auto fed = run_odach({&design.encoded});
    return derive_scores(design, fed.beta_final, 100);
  };

  ParsimonyOptions opts;
  opts.cv_folds = 4;
  opts.seed = 3;
  auto curve = parsimony_curve({1, 2}, {&site}, SiteWeights({1.0}), fitter, opts);
  REQUIRE(curve.points.size() == 2);
  CHECK(curve.points[0].m == 1);
  CHECK(curve.points[0].variables == std::vector<std::string>{"x1"});
  CHECK(curve.points[1].variables == std::vector<std::string>{"x1", "x2"});
  // The informative variable alone should already discriminate.
  CHECK(curve.points[0].psi > 0.6);
  CHECK(curve.points[0].phi.size() == 1);

  const std::string csv = curve.to_csv();
  CHECK(csv.find("m,added_variable,psi,phi_site1\n") == 0);

  // A fitter that always fails surfaces as an all-folds error.
  auto failing = [](const std::vector<const SurvivalDataset*>&) -> ScoringTable {
    throw std::runtime_error("no model");
  };
  CHECK_THROWS_AS(parsimony_curve({1, 2}, {&site}, SiteWeights({1.0}), failing, opts),
                  std::runtime_error);
}

TEST_CASE("parsimony_curve: single-variable curve forces m = 1") {
  Rng rng(37);
  auto site = testutil::random_dataset(rng, 80, 1, 0.2);
  auto fitter = [](const std::vector<const SurvivalDataset*>& train) {
    std::vector<std::vector<double>> cuts;
    cuts.push_back(local_quantile_cutoffs(*train.front(), 0).cutoffs);
    auto design = categorize(*train.front(), build_scheme(*train.front(), cuts));
    auto fed = run_odach({&design.encoded});
    return derive_scores(design, fed.beta_final, 100);
  };
  ParsimonyOptions opts;
  opts.cv_folds = 3;
  opts.seed = 11;
  auto curve = parsimony_curve({1}, {&site}, SiteWeights({1.0}), fitter, opts);
  REQUIRE(curve.points.size() == 1);
  CHECK(select_model(curve, 10, 0.01).d == 1);
}
