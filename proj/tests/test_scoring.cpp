#include "fedsurv/scoring.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace fedsurv;
using testutil::make_dataset;

namespace {

// Two variables: A continuous with 3 intervals (cutoffs 10, 20), B a
// binary flag. A subject row exists in every category.
CategoricalDesign two_variable_design() {
  auto base = make_dataset({1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 1, 0},
                           {{5, 15, 25, 5, 15, 25}, {0, 0, 0, 1, 1, 1}}, {"a", "b"});
  std::vector<SurvivalRecord> recs = base.records();
  SurvivalDataset data(recs, {"a", "b"},
                       {VariableKind::continuous, VariableKind::categorical});
  return categorize(data, build_scheme(data, {{10, 20}}));
}

}  // namespace

TEST_CASE("derive_scores: shift, scale and round to the documented example") {
  auto design = two_variable_design();
  Eigen::VectorXd beta(3);  // a:1, a:2, b:1
  beta << 0.5, 1.0, 1.0;
  auto table = derive_scores(design, beta, 100, "unit");

  REQUIRE(table.variables.size() == 2);
  CHECK(table.variables[0].points == std::vector<long long>{0, 25, 50});
  CHECK(table.variables[1].points == std::vector<long long>{0, 50});
  CHECK(table.max_total() == 100);
  CHECK(table.scale == doctest::Approx(50.0).epsilon(1e-14));
  CHECK(table.variables[0].labels ==
        std::vector<std::string>{"<10", "[10,20)", ">=20"});
}

TEST_CASE("single binary variable gets the whole range") {
  auto base = make_dataset({1, 2, 3, 4}, {1, 1, 0, 1}, {{0, 1, 0, 1}}, {"flag"});
  std::vector<SurvivalRecord> recs = base.records();
  SurvivalDataset data(recs, {"flag"}, {VariableKind::categorical});
  auto design = categorize(data, build_scheme(data, {}));
  Eigen::VectorXd beta(1);
  beta << 0.73;
  auto table = derive_scores(design, beta, 100);
  CHECK(table.variables[0].points == std::vector<long long>{0, 100});
}

TEST_CASE("negative coefficients shift so the minimum category is zero") {
  auto base = make_dataset({1, 2, 3, 4}, {1, 1, 0, 1}, {{0, 1, 0, 1}}, {"flag"});
  std::vector<SurvivalRecord> recs = base.records();
  SurvivalDataset data(recs, {"flag"}, {VariableKind::categorical});
  auto design = categorize(data, build_scheme(data, {}));
  Eigen::VectorXd beta(1);
  beta << -0.4;  // protective: the reference now carries the points
  auto table = derive_scores(design, beta, 100);
  CHECK(table.variables[0].points == std::vector<long long>{100, 0});
}

TEST_CASE("all-zero coefficients are an uninformative model") {
  auto design = two_variable_design();
  CHECK_THROWS_WITH_AS(derive_scores(design, Eigen::VectorXd::Zero(3), 100),
                       "uninformative model", std::runtime_error);
}

TEST_CASE("rounding never pushes the maximum total past s_max") {
  auto design = two_variable_design();
  Eigen::VectorXd beta(3);
  beta << 0.0, 0.5, 0.5;  // both variables round up at s_max = 1
  auto table = derive_scores(design, beta, 1);
  CHECK(table.max_total() <= 1);
  long long total_points = 0;
  for (const auto& v : table.variables)
    for (long long pts : v.points) {
      CHECK(pts >= 0);
      total_points += pts;
    }
  CHECK(total_points >= 1);  // not everything was walked back
}

TEST_CASE("score_subject: reference rows score zero, maxima reach the bound") {
  auto design = two_variable_design();
  Eigen::VectorXd beta(3);
  beta << 0.5, 1.0, 1.0;
  auto table = derive_scores(design, beta, 100);

  Eigen::VectorXd reference(2), maximal(2), mixed(2);
  reference << 5.0, 0.0;
  maximal << 25.0, 1.0;
  mixed << 15.0, 1.0;
  const std::vector<std::string> names = {"a", "b"};
  CHECK(score_subject(table, names, reference) == 0);
  CHECK(score_subject(table, names, maximal) == 100);
  CHECK(score_subject(table, names, mixed) == 75);

  CHECK_THROWS_AS(score_subject(table, {"a", "z"}, mixed), std::invalid_argument);
}

TEST_CASE("scores are a rounded affine transform of the linear predictor") {
  Rng rng(7);
  auto data = testutil::random_dataset(rng, 120, 3, 0.25);
  std::vector<std::vector<double>> cuts;
  for (int k = 0; k < 3; ++k) cuts.push_back(local_quantile_cutoffs(data, k).cutoffs);
  auto design = categorize(data, build_scheme(data, cuts));
  Eigen::VectorXd beta(design.encoded.p());
  for (int c = 0; c < design.encoded.p(); ++c) beta(c) = rng.normal(0.0, 0.6);
  auto table = derive_scores(design, beta, 100);
  const int n_vars = static_cast<int>(table.variables.size());

  // Shifted linear predictor per subject, from the design's categories.
  for (int i = 0; i < data.n(); ++i) {
    double shifted = 0.0;
    for (size_t v = 0; v < design.variables.size(); ++v) {
      const auto& l = design.variables[v];
      std::vector<double> coef(static_cast<size_t>(l.n_categories), 0.0);
      for (int c = 1; c < l.n_categories; ++c)
        coef[static_cast<size_t>(c)] = beta(l.first_dummy_column + c - 1);
      const double lo = *std::min_element(coef.begin(), coef.end());
      shifted += coef[static_cast<size_t>(design.category(i, static_cast<int>(v)))] - lo;
    }
    const long long total = score_subject(table, data, i);
    CHECK(std::fabs(table.scale * shifted - static_cast<double>(total)) <=
          0.5 * n_vars + 1.0 + 1e-9);  // rounding plus at most the s_max walk-back
  }
}

TEST_CASE("positive rescaling of the coefficients leaves the table unchanged") {
  auto design = two_variable_design();
  Eigen::VectorXd beta(3);
  beta << 0.5, 1.0, 1.0;
  auto t1 = derive_scores(design, beta, 100);
  auto t2 = derive_scores(design, (3.7 * beta).eval(), 100);
  REQUIRE(t1.variables.size() == t2.variables.size());
  for (size_t v = 0; v < t1.variables.size(); ++v)
    CHECK(t1.variables[v].points == t2.variables[v].points);
}

TEST_CASE("table CSV quotes interval labels and text layout aligns") {
  auto design = two_variable_design();
  Eigen::VectorXd beta(3);
  beta << 0.5, 1.0, 1.0;
  auto table = derive_scores(design, beta, 100);
  const std::string csv = table.to_csv();
  CHECK(csv.find("variable,interval,points\n") == 0);
  CHECK(csv.find("a,\"[10,20)\",25") != std::string::npos);
  CHECK(csv.find("b,1,50") != std::string::npos);
  const std::string text = table.to_text();
  CHECK(text.find("Variable") != std::string::npos);
  CHECK(text.find(">=20") != std::string::npos);
}
