#include "fedsurv/odach.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace fedsurv;
using testutil::make_dataset;

namespace {

SurvivalDataset weibull_site(Rng& rng, int n, const Eigen::VectorXd& beta, double shape,
                             double scale, double censor_rate, int site_id = 0) {
  const int p = static_cast<int>(beta.size());
  std::vector<SurvivalRecord> records;
  for (int i = 0; i < n; ++i) {
    SurvivalRecord r;
    r.site_id = site_id;
    r.covariates = Eigen::VectorXd(p);
    for (int k = 0; k < p; ++k) r.covariates(k) = rng.normal();
    const double mult = std::exp(beta.dot(r.covariates));
    const double t = scale * std::pow(rng.exponential(1.0) / mult, 1.0 / shape);
    const double c = rng.exponential(censor_rate);
    r.time = std::min(t, c);
    r.event = t <= c ? 1 : 0;
    records.push_back(std::move(r));
  }
  std::vector<std::string> names;
  for (int k = 0; k < p; ++k) names.push_back("x" + std::to_string(k + 1));
  return SurvivalDataset(std::move(records), std::move(names),
                         std::vector<VariableKind>(static_cast<size_t>(p), VariableKind::continuous));
}

// Pooled stratified Cox: site-specific risk sets, n_j-weighted scaled
// likelihoods, maximized with the shared Newton machinery. Used as the
// independent estimate the protocol is checked against.
Eigen::VectorXd pooled_stratified_fit(const std::vector<const SurvivalDataset*>& sites) {
  double total_n = 0.0;
  for (const auto* s : sites) total_n += s->n();
  auto objective = [&](const Eigen::VectorXd& b, bool derivs) {
    ObjectiveEval out;
    out.value = 0.0;
    if (derivs) {
      out.grad = Eigen::VectorXd::Zero(b.size());
      out.hess = Eigen::MatrixXd::Zero(b.size(), b.size());
    }
    for (const auto* s : sites) {
      const double w = s->n() / total_n;
      ObjectiveEval e = cox_derivatives(*s, b, derivs);
      out.value += w * e.value;
      if (derivs) {
        out.grad += w * e.grad;
        out.hess += w * e.hess;
      }
    }
    return out;
  };
  return newton_maximize(objective, Eigen::VectorXd::Zero(sites.front()->p())).beta;
}

}  // namespace

TEST_CASE("inverse-variance combination: identity, hand value, symmetry") {
  Eigen::VectorXd b1(1), b2(1);
  Eigen::MatrixXd v1(1, 1), v2(1, 1);
  b1 << 1.0;
  v1 << 0.5;
  b2 << 2.0;
  v2 << 1.0;

  auto single = inverse_variance_combine({{b1, v1}});
  CHECK(single.beta(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(single.covariance(0, 0) == doctest::Approx(0.5).epsilon(1e-14));

  auto combined = inverse_variance_combine({{b1, v1}, {b2, v2}});
  CHECK(combined.beta(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(combined.covariance(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Equal covariances reduce to the coordinate-wise mean.
  Eigen::VectorXd c1(2), c2(2);
  c1 << 1.0, -2.0;
  c2 << 3.0, 6.0;
  Eigen::MatrixXd shared(2, 2);
  shared << 1.0, 0.2, 0.2, 0.7;
  auto mean = inverse_variance_combine({{c1, shared}, {c2, shared}});
  CHECK(mean.beta(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(mean.beta(1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("inverse-variance combination names the singular site") {
  Eigen::VectorXd b(1);
  b << 1.0;
  Eigen::MatrixXd good(1, 1), bad(1, 1);
  good << 1.0;
  bad << 0.0;
  CHECK_THROWS_WITH_AS(inverse_variance_combine({{b, good}, {b, bad}}),
                       "inverse_variance_combine: singular covariance at site 1",
                       std::runtime_error);
}

TEST_CASE("global derivatives are n-weighted averages") {
  DerivativeMessage m1, m2;
  m1.site_id = 0;
  m1.n_j = 100;
  m1.grad_at_bar = Eigen::VectorXd::Constant(1, 1.0);
  m1.hess_at_bar = Eigen::MatrixXd::Constant(1, 1, -2.0);
  m2.site_id = 1;
  m2.n_j = 300;
  m2.grad_at_bar = Eigen::VectorXd::Constant(1, -1.0);
  m2.hess_at_bar = Eigen::MatrixXd::Constant(1, 1, -4.0);

  auto single = global_derivatives({m1});
  CHECK(single.grad(0) == doctest::Approx(1.0).epsilon(1e-14));

  auto g = global_derivatives({m1, m2});
  CHECK(g.grad(0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(g.hess(0, 0) == doctest::Approx(-3.5).epsilon(1e-14));

  m2.grad_at_bar = Eigen::VectorXd::Zero(1);
  m1.grad_at_bar = Eigen::VectorXd::Zero(1);
  CHECK(global_derivatives({m1, m2}).grad.norm() == 0.0);

  DerivativeMessage wrong = m2;
  wrong.grad_at_bar = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(global_derivatives({m1, wrong}), std::invalid_argument);
}

TEST_CASE("surrogate equals the local likelihood when global matches local") {
  Rng rng(5);
  auto data = testutil::random_dataset(rng, 40, 2, 0.3);
  Eigen::VectorXd beta_bar(2);
  beta_bar << 0.2, -0.1;
  const ObjectiveEval at_bar = cox_derivatives(data, beta_bar);

  for (double offset : {-0.5, 0.0, 0.3}) {
    Eigen::VectorXd beta = beta_bar.array() + offset;
    const double surrogate =
        surrogate_log_likelihood(data, beta, beta_bar, at_bar.grad, at_bar.hess);
    CHECK(surrogate == doctest::Approx(local_log_partial_likelihood(data, beta)).epsilon(1e-12));
  }
}

TEST_CASE("surrogate gradient and hessian match the global derivatives at beta_bar") {
  Rng rng(17);
  auto site_a = testutil::random_dataset(rng, 45, 3, 0.3);
  auto site_b = testutil::random_dataset(rng, 70, 3, 0.3);

  Eigen::VectorXd beta_bar(3);
  beta_bar << 0.15, -0.3, 0.05;
  DerivativeMessage da{0, static_cast<uint64_t>(site_a.n()), cox_gradient(site_a, beta_bar),
                       cox_hessian(site_a, beta_bar)};
  DerivativeMessage db{1, static_cast<uint64_t>(site_b.n()), cox_gradient(site_b, beta_bar),
                       cox_hessian(site_b, beta_bar)};
  const GlobalDerivatives global = global_derivatives({da, db});

  for (const SurvivalDataset* site : {&site_a, &site_b}) {
    auto value = [&](const Eigen::VectorXd& b) {
      return surrogate_log_likelihood(*site, b, beta_bar, global.grad, global.hess);
    };
    const Eigen::VectorXd g_fd = testutil::fd_gradient5(value, beta_bar);
    CHECK((g_fd - global.grad).cwiseAbs().maxCoeff() < 1e-8);

    // Hessian identity via differences of the assembled surrogate
    // gradient (local gradient plus corrections).
    auto grad = [&](const Eigen::VectorXd& b) {
      Eigen::VectorXd g = cox_gradient(*site, b);
      g += global.grad - cox_gradient(*site, beta_bar);
      g += (global.hess - cox_hessian(*site, beta_bar)) * (b - beta_bar);
      return g;
    };
    const Eigen::MatrixXd h_fd = testutil::fd_jacobian5(grad, beta_bar);
    CHECK((h_fd - global.hess).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("fit_surrogate reduces to the local fit for a single site") {
  Rng rng(23);
  auto data = testutil::random_dataset(rng, 60, 2, 0.25);
  auto local = fit_cox(data);
  DerivativeMessage d{0, static_cast<uint64_t>(data.n()), cox_gradient(data, local.beta_hat),
                      cox_hessian(data, local.beta_hat)};
  const GlobalDerivatives global = global_derivatives({d});
  auto surrogate = fit_surrogate(data, local.beta_hat, global.grad, global.hess);
  CHECK((surrogate.beta_tilde - local.beta_hat).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("identical sites collapse: surrogate estimates equal beta_bar's optimum") {
  Rng rng(29);
  auto data = testutil::random_dataset(rng, 80, 2, 0.3);
  std::vector<const SurvivalDataset*> sites = {&data, &data, &data};
  auto fit = run_odach(sites);
  auto local = fit_cox(data);
  CHECK((fit.beta_bar - local.beta_hat).cwiseAbs().maxCoeff() < 1e-7);
  for (const auto& m : fit.per_site)
    CHECK((m.beta_tilde - fit.beta_bar).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fit.beta_final - fit.beta_bar).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit_surrogate matches a value-only maximizer of the assembled surrogate") {
  Rng rng(31);
  Eigen::VectorXd beta_true(2);
  beta_true << 0.6, -0.4;
  auto site_a = weibull_site(rng, 30, beta_true, 1.0, 1.0, 0.3, 0);
  auto site_b = weibull_site(rng, 30, beta_true, 1.3, 2.0, 0.3, 1);

  auto fa = fit_cox(site_a);
  auto fb = fit_cox(site_b);
  auto bar = inverse_variance_combine({{fa.beta_hat, fa.covariance},
                                       {fb.beta_hat, fb.covariance}});
  DerivativeMessage da{0, 30, cox_gradient(site_a, bar.beta), cox_hessian(site_a, bar.beta)};
  DerivativeMessage db{1, 30, cox_gradient(site_b, bar.beta), cox_hessian(site_b, bar.beta)};
  const GlobalDerivatives global = global_derivatives({da, db});

  auto fitted = fit_surrogate(site_a, bar.beta, global.grad, global.hess);

  // Explicitly assembled surrogate, maximized coordinate-wise with a
  // value-only golden-section search.
  const Eigen::VectorXd grad_diff = global.grad - da.grad_at_bar;
  const Eigen::MatrixXd hess_diff = global.hess - da.hess_at_bar;
  auto value = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd c = b - bar.beta;
    return local_log_partial_likelihood(site_a, b) + grad_diff.dot(b) +
           0.5 * c.dot(hess_diff * c);
  };
  Eigen::VectorXd oracle = bar.beta;
  for (int sweep = 0; sweep < 60; ++sweep) {
    for (int k = 0; k < 2; ++k) {
      auto slice = [&](double x) {
        Eigen::VectorXd b = oracle;
        b(k) = x;
        return value(b);
      };
      oracle(k) = testutil::grid_maximize_1d(slice, oracle(k) - 1.0, oracle(k) + 1.0, 1e-9);
    }
  }
  CHECK((fitted.beta_tilde - oracle).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("run_odach with one site equals the local fit, transcript has 3 messages") {
  Rng rng(37);
  auto data = testutil::random_dataset(rng, 50, 2, 0.2);
  auto fit = run_odach({&data});
  auto local = fit_cox(data);
  CHECK((fit.beta_final - local.beta_hat).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(fit.transcript.entries().size() == 3);
  CHECK(fit.transcript.entries()[0].msg_type == 1);
  CHECK(fit.transcript.entries()[1].msg_type == 2);
  CHECK(fit.transcript.entries()[2].msg_type == 3);
}

TEST_CASE("run_odach tracks the pooled stratified fit across heterogeneous sites") {
  Rng rng(41);
  Eigen::VectorXd beta_true(2);
  beta_true << 0.7, -0.4;
  auto s1 = weibull_site(rng, 250, beta_true, 1.0, 1.0, 0.25, 0);
  auto s2 = weibull_site(rng, 350, beta_true, 1.4, 3.0, 0.25, 1);
  std::vector<const SurvivalDataset*> sites = {&s1, &s2};

  auto fed = run_odach(sites);
  const Eigen::VectorXd pooled = pooled_stratified_fit(sites);
  CHECK((fed.beta_final - pooled).cwiseAbs().maxCoeff() <= 0.05);
  CHECK(fed.transcript.entries().size() == 6);
}

TEST_CASE("phase ordering: all of phase r precedes phase r+1, sites ascend within a phase") {
  Rng rng(43);
  auto s1 = testutil::random_dataset(rng, 40, 2, 0.2);
  auto s2 = testutil::random_dataset(rng, 60, 2, 0.2);
  auto s3 = testutil::random_dataset(rng, 50, 2, 0.2);
  auto fit = run_odach({&s1, &s2, &s3});
  const auto& entries = fit.transcript.entries();
  REQUIRE(entries.size() == 9);
  for (size_t i = 0; i < entries.size(); ++i) {
    CHECK(entries[i].phase == static_cast<int>(i / 3) + 1);
    CHECK(entries[i].site_id == static_cast<int>(i % 3));
  }
}

TEST_CASE("a failing site aborts with the partial transcript") {
  Rng rng(47);
  auto good = testutil::random_dataset(rng, 40, 1, 0.2);
  auto degenerate = make_dataset({1, 2, 3, 4}, {1, 1, 1, 1}, {{2, 2, 2, 2}});
  try {
    run_odach({&good, &degenerate});
    FAIL("expected OdachRunError");
  } catch (const OdachRunError& e) {
    CHECK(e.phase == 1);
    CHECK(e.site_id == 1);
    CHECK(e.transcript.entries().size() == 1);  // site 0's phase-1 broadcast
    CHECK(std::string(e.what()).find("singular information") != std::string::npos);
  }
}

TEST_CASE("wire format: exact frame sizes and bit-exact round trips") {
  LocalFitMessage msg;
  msg.site_id = 3;
  msg.n_j = 12345678901ULL;
  msg.beta_hat = Eigen::VectorXd(2);
  msg.beta_hat << 0.1, -2.5e-17;
  msg.covariance = Eigen::MatrixXd(2, 2);
  msg.covariance << 1.0, 0.25, 0.25, 2.0;

  auto frame = serialize_message(msg);
  CHECK(frame.size() == odach_frame_bytes(2));
  CHECK(frame.size() == 22 + 8 * (2 + 4));

  auto parsed = std::get<LocalFitMessage>(parse_message(frame));
  CHECK(parsed.site_id == 3);
  CHECK(parsed.n_j == 12345678901ULL);
  CHECK(parsed.beta_hat(1) == msg.beta_hat(1));
  CHECK(parsed.covariance == msg.covariance);

  // Size depends only on p, not on n_j.
  msg.n_j = 7;
  CHECK(serialize_message(msg).size() == frame.size());
}

TEST_CASE("frame validator rejects anything but header + vector + matrix") {
  LocalFitMessage msg;
  msg.site_id = 0;
  msg.n_j = 10;
  msg.beta_hat = Eigen::VectorXd::Zero(2);
  msg.covariance = Eigen::MatrixXd::Identity(2, 2);
  auto frame = serialize_message(msg);

  auto corrupt = frame;
  corrupt[0] = 'X';
  CHECK_THROWS_AS(validate_frame(corrupt), std::runtime_error);

  corrupt = frame;
  corrupt[4] = 9;  // version
  CHECK_THROWS_AS(validate_frame(corrupt), std::runtime_error);

  corrupt = frame;
  corrupt[5] = 7;  // message type
  CHECK_THROWS_AS(validate_frame(corrupt), std::runtime_error);

  // A frame claiming p=2 but smuggling a per-record array: extra bytes.
  corrupt = frame;
  for (int i = 0; i < 800; ++i) corrupt.push_back(0);
  CHECK_THROWS_WITH_AS(validate_frame(corrupt),
                       "odach frame rejected: payload is not vector + matrix for header p",
                       std::runtime_error);

  CHECK_THROWS_AS(validate_frame(frame, 5), std::runtime_error);  // wrong p for the run
  CHECK_NOTHROW(validate_frame(frame, 2));
}

TEST_CASE("the bus rejects raw frames that do not satisfy the schema") {
  Transcript transcript;
  // A forged "dataset dump": valid-looking header clamped onto 100
  // records' worth of doubles.
  std::vector<uint8_t> forged = {'O', 'D', 'C', 'H', kOdachVersion, 1};
  for (int i = 0; i < 16; ++i) forged.push_back(0);
  forged[10] = 2;  // p = 2
  for (int i = 0; i < 100 * 3 * 8; ++i) forged.push_back(0x42);
  CHECK_THROWS_AS(transcript.record_frame(1, forged), std::runtime_error);
  CHECK(transcript.entries().empty());
}

TEST_CASE("transcript serialization round-trips") {
  Rng rng(53);
  auto s1 = testutil::random_dataset(rng, 40, 2, 0.2);
  auto s2 = testutil::random_dataset(rng, 55, 2, 0.2);
  auto fit = run_odach({&s1, &s2});

  auto bytes = fit.transcript.serialize();
  auto restored = Transcript::deserialize(bytes);
  REQUIRE(restored.entries().size() == fit.transcript.entries().size());
  for (size_t i = 0; i < restored.entries().size(); ++i) {
    CHECK(restored.entries()[i].frame == fit.transcript.entries()[i].frame);
    CHECK(restored.entries()[i].site_id == fit.transcript.entries()[i].site_id);
  }
  CHECK(restored.total_bytes() == fit.transcript.total_bytes());
}

TEST_CASE("transcript size depends on p alone, not on site sample sizes") {
  Rng rng(59);
  auto small_a = testutil::random_dataset(rng, 30, 3, 0.2);
  auto small_b = testutil::random_dataset(rng, 35, 3, 0.2);
  auto big_a = testutil::random_dataset(rng, 400, 3, 0.2);
  auto big_b = testutil::random_dataset(rng, 900, 3, 0.2);

  auto fit_small = run_odach({&small_a, &small_b});
  auto fit_big = run_odach({&big_a, &big_b});
  CHECK(fit_small.transcript.total_bytes() == fit_big.transcript.total_bytes());
  REQUIRE(fit_small.transcript.entries().size() == fit_big.transcript.entries().size());
  for (size_t i = 0; i < fit_small.transcript.entries().size(); ++i) {
    CHECK(fit_small.transcript.entries()[i].frame.size() ==
          fit_big.transcript.entries()[i].frame.size());
  }
}
