#include "fedsurv/survival.hpp"

#include "fedsurv/math.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace fedsurv {

namespace {

struct TimeOrder {
  std::vector<int> idx;   // record indices sorted by ascending time
  explicit TimeOrder(const SurvivalDataset& data) : idx(static_cast<size_t>(data.n())) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return data.record(a).time < data.record(b).time;
    });
  }
};

StepSurvivalCurve product_limit(const SurvivalDataset& data, bool flip_indicator) {
  TimeOrder order(data);
  StepSurvivalCurve curve;
  double surv = 1.0;
  int at_risk = data.n();
  size_t i = 0;
  while (i < order.idx.size()) {
    const double t = data.record(order.idx[i]).time;
    int d = 0;
    int removed = 0;
    while (i < order.idx.size() && data.record(order.idx[i]).time == t) {
      int ev = data.record(order.idx[i]).event;
      if (flip_indicator) ev = 1 - ev;
      d += ev;
      ++removed;
      ++i;
    }
    if (d > 0) {
      surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      curve.times.push_back(t);
      curve.survival.push_back(surv);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(d);
    }
    at_risk -= removed;
  }
  return curve;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace

StepSurvivalCurve kaplan_meier(const SurvivalDataset& data) {
  return product_limit(data, false);
}

StepSurvivalCurve censoring_kaplan_meier(const SurvivalDataset& data) {
  return product_limit(data, true);
}

LogRankResult logrank_test(const std::vector<SurvivalDataset>& groups) {
  const int k = static_cast<int>(groups.size());
  if (k < 2) throw std::invalid_argument("logrank_test: need at least 2 groups");

  struct Obs {
    double time;
    int event;
    int group;
  };
  std::vector<Obs> obs;
  int total_events = 0;
  for (int g = 0; g < k; ++g) {
    for (const auto& r : groups[static_cast<size_t>(g)].records()) {
      obs.push_back({r.time, r.event, g});
      total_events += r.event;
    }
  }
  if (total_events == 0) throw std::runtime_error("no events; test undefined");

  std::stable_sort(obs.begin(), obs.end(),
                   [](const Obs& a, const Obs& b) { return a.time < b.time; });

  std::vector<double> at_risk(static_cast<size_t>(k));
  for (const auto& o : obs) at_risk[static_cast<size_t>(o.group)] += 1.0;

  Eigen::VectorXd observed = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(k, k);

  size_t i = 0;
  while (i < obs.size()) {
    const double t = obs[i].time;
    std::vector<double> deaths(static_cast<size_t>(k), 0.0);
    std::vector<double> leaving(static_cast<size_t>(k), 0.0);
    double d = 0.0;
    while (i < obs.size() && obs[i].time == t) {
      deaths[static_cast<size_t>(obs[i].group)] += obs[i].event;
      leaving[static_cast<size_t>(obs[i].group)] += 1.0;
      d += obs[i].event;
      ++i;
    }
    const double n = std::accumulate(at_risk.begin(), at_risk.end(), 0.0);
    if (d > 0.0) {
      for (int g = 0; g < k; ++g) {
        observed(g) += deaths[static_cast<size_t>(g)];
        expected(g) += d * at_risk[static_cast<size_t>(g)] / n;
      }
      if (n > 1.0) {
        const double correction = d * (n - d) / (n - 1.0);
        for (int g = 0; g < k; ++g) {
          const double pg = at_risk[static_cast<size_t>(g)] / n;
          for (int h = 0; h < k; ++h) {
            const double ph = at_risk[static_cast<size_t>(h)] / n;
            var(g, h) += correction * (g == h ? pg * (1.0 - pg) : -pg * ph);
          }
        }
      }
    }
    for (int g = 0; g < k; ++g) at_risk[static_cast<size_t>(g)] -= leaving[static_cast<size_t>(g)];
  }

  // Quadratic form over the first K-1 groups; pseudo-inverse so that
  // degenerate tables (identical groups) yield 0 rather than blowing up.
  const int m = k - 1;
  Eigen::VectorXd z = (observed - expected).head(m);
  Eigen::MatrixXd v = var.topLeftCorner(m, m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd w = es.eigenvectors().transpose() * z;
  double chi = 0.0;
  for (int j = 0; j < m; ++j) {
    if (ev(j) > cutoff) chi += w(j) * w(j) / ev(j);
  }

  LogRankResult result;
  result.chi_square = chi;
  result.df = m;
  result.p_value = chi_square_sf(chi, m);
  return result;
}

CumulativeHazardCurve breslow_baseline_hazard(const SurvivalDataset& data,
                                              const Eigen::VectorXd& beta) {
  if (beta.size() != data.p())
    throw std::invalid_argument("breslow_baseline_hazard: beta length mismatch");

  std::vector<double> eta(static_cast<size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) eta[static_cast<size_t>(i)] = beta.dot(data.record(i).covariates);

  // Descending-time sweep; the risk set only grows, so a single running
  // sum with max-rescaling covers every event time.
  std::vector<int> idx(static_cast<size_t>(data.n()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return data.record(a).time > data.record(b).time;
  });

  struct EventTime {
    double time;
    int deaths;
    int at_risk;
    double log_denominator;
  };
  std::vector<EventTime> steps;

  double s0 = 0.0;
  double shift = -std::numeric_limits<double>::infinity();
  size_t i = 0;
  int in_risk = 0;
  while (i < idx.size()) {
    const double t = data.record(idx[i]).time;
    int d = 0;
    while (i < idx.size() && data.record(idx[i]).time == t) {
      const double e = eta[static_cast<size_t>(idx[i])];
      if (e > shift) {
        const double scale = std::isfinite(shift) ? std::exp(shift - e) : 0.0;
        s0 = s0 * scale + 1.0;
        shift = e;
      } else {
        s0 += std::exp(e - shift);
      }
      d += data.record(idx[i]).event;
      ++in_risk;
      ++i;
    }
    if (d > 0) steps.push_back({t, d, in_risk, shift + std::log(s0)});
  }

  CumulativeHazardCurve curve;
  double cum = 0.0;
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    cum += static_cast<double>(it->deaths) * std::exp(-it->log_denominator);
    curve.times.push_back(it->time);
    curve.cum_hazard.push_back(cum);
    curve.at_risk.push_back(it->at_risk);
    curve.events.push_back(it->deaths);
  }
  return curve;
}

std::string curve_to_csv(const StepSurvivalCurve& curve) {
  std::string out = "time,survival,at_risk,events\n";
  for (size_t i = 0; i < curve.times.size(); ++i) {
    out += format_double(curve.times[i]) + "," + format_double(curve.survival[i]) + "," +
           std::to_string(curve.at_risk[i]) + "," + std::to_string(curve.events[i]) + "\n";
  }
  return out;
}

std::string curve_to_csv(const CumulativeHazardCurve& curve) {
  std::string out = "time,cum_hazard,at_risk,events\n";
  for (size_t i = 0; i < curve.times.size(); ++i) {
    out += format_double(curve.times[i]) + "," + format_double(curve.cum_hazard[i]) + "," +
           std::to_string(curve.at_risk[i]) + "," + std::to_string(curve.events[i]) + "\n";
  }
  return out;
}

}  // namespace fedsurv
