#include "fedsurv/odach.hpp"

#include "fedsurv/math.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace fedsurv {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<uint8_t>& out, double x) { put_u64(out, std::bit_cast<uint64_t>(x)); }

uint32_t get_u32(std::span<const uint8_t> b, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[at + i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::span<const uint8_t> b, size_t at) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[at + i]) << (8 * i);
  return v;
}

double get_f64(std::span<const uint8_t> b, size_t at) {
  return std::bit_cast<double>(get_u64(b, at));
}

struct Header {
  uint8_t msg_type = 0;
  uint32_t site_id = 0;
  uint32_t p = 0;
  uint64_t n_j = 0;
};

Header read_header(std::span<const uint8_t> frame) {
  Header h;
  h.msg_type = frame[5];
  h.site_id = get_u32(frame, 6);
  h.p = get_u32(frame, 10);
  h.n_j = get_u64(frame, 14);
  return h;
}

std::vector<uint8_t> encode(uint8_t msg_type, int site_id, uint64_t n_j,
                            const Eigen::VectorXd& vec, const Eigen::MatrixXd& mat) {
  const int p = static_cast<int>(vec.size());
  if (mat.rows() != p || mat.cols() != p)
    throw std::invalid_argument("odach message: matrix does not match vector length");
  std::vector<uint8_t> out;
  out.reserve(odach_frame_bytes(p));
  out.push_back('O');
  out.push_back('D');
  out.push_back('C');
  out.push_back('H');
  out.push_back(kOdachVersion);
  out.push_back(msg_type);
  put_u32(out, static_cast<uint32_t>(site_id));
  put_u32(out, static_cast<uint32_t>(p));
  put_u64(out, n_j);
  for (int i = 0; i < p; ++i) put_f64(out, vec(i));
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c) put_f64(out, mat(r, c));
  return out;
}

}  // namespace

size_t odach_frame_bytes(int p) {
  return kOdachHeaderBytes + 8 * (static_cast<size_t>(p) + static_cast<size_t>(p) * p);
}

std::vector<uint8_t> serialize_message(const OdachMessage& msg) {
  return std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LocalFitMessage>) {
          return encode(1, m.site_id, m.n_j, m.beta_hat, m.covariance);
        } else if constexpr (std::is_same_v<T, DerivativeMessage>) {
          return encode(2, m.site_id, m.n_j, m.grad_at_bar, m.hess_at_bar);
        } else {
          return encode(3, m.site_id, m.n_j, m.beta_tilde, m.covariance_tilde);
        }
      },
      msg);
}

void validate_frame(std::span<const uint8_t> frame, int expected_p) {
  if (frame.size() < kOdachHeaderBytes)
    throw std::runtime_error("odach frame rejected: shorter than header");
  if (frame[0] != 'O' || frame[1] != 'D' || frame[2] != 'C' || frame[3] != 'H')
    throw std::runtime_error("odach frame rejected: bad magic");
  if (frame[4] != kOdachVersion) throw std::runtime_error("odach frame rejected: bad version");
  const Header h = read_header(frame);
  if (h.msg_type < 1 || h.msg_type > 3)
    throw std::runtime_error("odach frame rejected: unknown message type");
  if (h.p < 1) throw std::runtime_error("odach frame rejected: p must be >= 1");
  // The schema admits exactly one p-vector and one p-by-p matrix; any
  // other payload length (a per-record array, say) is rejected here.
  if (frame.size() != odach_frame_bytes(static_cast<int>(h.p)))
    throw std::runtime_error("odach frame rejected: payload is not vector + matrix for header p");
  if (expected_p >= 0 && static_cast<int>(h.p) != expected_p)
    throw std::runtime_error("odach frame rejected: p does not match the run");
}

OdachMessage parse_message(std::span<const uint8_t> frame) {
  validate_frame(frame);
  const Header h = read_header(frame);
  const int p = static_cast<int>(h.p);
  Eigen::VectorXd vec(p);
  Eigen::MatrixXd mat(p, p);
  size_t at = kOdachHeaderBytes;
  for (int i = 0; i < p; ++i, at += 8) vec(i) = get_f64(frame, at);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c, at += 8) mat(r, c) = get_f64(frame, at);

  const int site_id = static_cast<int>(h.site_id);
  switch (h.msg_type) {
    case 1:
      return LocalFitMessage{site_id, h.n_j, std::move(vec), std::move(mat)};
    case 2:
      return DerivativeMessage{site_id, h.n_j, std::move(vec), std::move(mat)};
    default:
      return SurrogateFitMessage{site_id, h.n_j, std::move(vec), std::move(mat)};
  }
}

void Transcript::record(int phase, const OdachMessage& msg) {
  record_frame(phase, serialize_message(msg));
}

void Transcript::record_frame(int phase, std::vector<uint8_t> frame) {
  validate_frame(frame);
  const Header h = read_header(frame);
  entries_.push_back({phase, static_cast<int>(h.site_id), h.msg_type, std::move(frame)});
}

size_t Transcript::total_bytes() const {
  size_t total = 0;
  for (const auto& e : entries_) total += e.frame.size();
  return total;
}

std::vector<uint8_t> Transcript::serialize() const {
  std::vector<uint8_t> out;
  for (const auto& e : entries_) {
    put_u32(out, static_cast<uint32_t>(e.frame.size()));
    out.insert(out.end(), e.frame.begin(), e.frame.end());
  }
  return out;
}

Transcript Transcript::deserialize(std::span<const uint8_t> bytes) {
  Transcript t;
  size_t at = 0;
  while (at < bytes.size()) {
    if (at + 4 > bytes.size()) throw std::runtime_error("transcript: truncated length prefix");
    const uint32_t len = get_u32(bytes, at);
    at += 4;
    if (at + len > bytes.size()) throw std::runtime_error("transcript: truncated frame");
    std::vector<uint8_t> frame(bytes.begin() + static_cast<long>(at),
                               bytes.begin() + static_cast<long>(at + len));
    at += len;
    const uint8_t msg_type = frame.size() > 5 ? frame[5] : 0;
    t.record_frame(msg_type, std::move(frame));
  }
  return t;
}

CombinedEstimate inverse_variance_combine(const std::vector<CombinedEstimate>& fits) {
  if (fits.empty()) throw std::invalid_argument("inverse_variance_combine: no fits");
  const Eigen::Index p = fits.front().beta.size();
  Eigen::MatrixXd precision_sum = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(p);
  for (size_t j = 0; j < fits.size(); ++j) {
    const auto& f = fits[j];
    if (f.beta.size() != p || f.covariance.rows() != p || f.covariance.cols() != p)
      throw std::invalid_argument("inverse_variance_combine: dimension mismatch");
    auto inv = spd_inverse(f.covariance);
    if (!inv)
      throw std::runtime_error("inverse_variance_combine: singular covariance at site " +
                               std::to_string(j));
    precision_sum += *inv;
    weighted += *inv * f.beta;
  }
  auto total_cov = spd_inverse(precision_sum);
  if (!total_cov)
    throw std::runtime_error("inverse_variance_combine: combined precision is singular");
  return {*total_cov * weighted, *total_cov};
}

GlobalDerivatives global_derivatives(const std::vector<DerivativeMessage>& msgs) {
  if (msgs.empty()) throw std::invalid_argument("global_derivatives: no messages");
  const Eigen::Index p = msgs.front().grad_at_bar.size();
  double total_n = 0.0;
  GlobalDerivatives g{Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Zero(p, p)};
  for (const auto& m : msgs) {
    if (m.grad_at_bar.size() != p || m.hess_at_bar.rows() != p || m.hess_at_bar.cols() != p)
      throw std::invalid_argument("global_derivatives: dimension mismatch");
    const double w = static_cast<double>(m.n_j);
    g.grad += w * m.grad_at_bar;
    g.hess += w * m.hess_at_bar;
    total_n += w;
  }
  if (!(total_n > 0.0)) throw std::invalid_argument("global_derivatives: total sample size is 0");
  g.grad /= total_n;
  g.hess /= total_n;
  return g;
}

double surrogate_log_likelihood(const SurvivalDataset& local_data, const Eigen::VectorXd& beta,
                                const Eigen::VectorXd& beta_bar,
                                const Eigen::VectorXd& global_grad,
                                const Eigen::MatrixXd& global_hess) {
  const ObjectiveEval at_bar = cox_derivatives(local_data, beta_bar);
  const Eigen::VectorXd grad_diff = global_grad - at_bar.grad;
  const Eigen::MatrixXd hess_diff = global_hess - at_bar.hess;
  const Eigen::VectorXd centered = beta - beta_bar;
  return local_log_partial_likelihood(local_data, beta) + grad_diff.dot(beta) +
         0.5 * centered.dot(hess_diff * centered);
}

SurrogateFitMessage fit_surrogate(const SurvivalDataset& local_data,
                                  const Eigen::VectorXd& beta_bar,
                                  const Eigen::VectorXd& global_grad,
                                  const Eigen::MatrixXd& global_hess,
                                  const NewtonOptions& options) {
  const ObjectiveEval at_bar = cox_derivatives(local_data, beta_bar);
  const Eigen::VectorXd grad_diff = global_grad - at_bar.grad;
  const Eigen::MatrixXd hess_diff = global_hess - at_bar.hess;

  auto objective = [&](const Eigen::VectorXd& b, bool derivs) {
    ObjectiveEval eval = cox_derivatives(local_data, b, derivs);
    const Eigen::VectorXd centered = b - beta_bar;
    eval.value += grad_diff.dot(b) + 0.5 * centered.dot(hess_diff * centered);
    if (derivs) {
      eval.grad += grad_diff + hess_diff * centered;
      eval.hess += hess_diff;
    }
    return eval;
  };
  NewtonResult r = newton_maximize(objective, beta_bar, options);

  SurrogateFitMessage msg;
  msg.site_id = local_data.record(0).site_id;
  msg.n_j = static_cast<uint64_t>(local_data.n());
  msg.beta_tilde = r.beta;
  msg.covariance_tilde = r.covariance;
  return msg;
}

FederatedFit run_odach(const std::vector<const SurvivalDataset*>& sites,
                       const NewtonOptions& options) {
  if (sites.empty()) throw std::invalid_argument("run_odach: no sites");
  const auto& names = sites.front()->variable_names();
  for (const auto* s : sites) {
    if (s->variable_names() != names)
      throw std::invalid_argument("run_odach: sites disagree on the variable schema");
  }

  FederatedFit fit;
  const int k = static_cast<int>(sites.size());

  // Phase 1: every site broadcasts its local fit.
  std::vector<LocalFitMessage> local_fits;
  for (int j = 0; j < k; ++j) {
    try {
      CoxFit local = fit_cox(*sites[static_cast<size_t>(j)]);
      LocalFitMessage msg{j, static_cast<uint64_t>(sites[static_cast<size_t>(j)]->n()),
                          local.beta_hat, local.covariance};
      fit.transcript.record(1, msg);
      local_fits.push_back(std::move(msg));
    } catch (const std::exception& e) {
      throw OdachRunError(std::string("odach phase 1 failed at site ") + std::to_string(j) +
                              ": " + e.what(),
                          1, j, fit.transcript);
    }
  }

  // Each site computes the same beta_bar from the phase-1 broadcasts.
  std::vector<CombinedEstimate> initial;
  for (const auto& m : local_fits) initial.push_back({m.beta_hat, m.covariance});
  fit.beta_bar = inverse_variance_combine(initial).beta;

  // Phase 2: derivatives at beta_bar.
  std::vector<DerivativeMessage> derivatives;
  for (int j = 0; j < k; ++j) {
    try {
      ObjectiveEval eval = cox_derivatives(*sites[static_cast<size_t>(j)], fit.beta_bar);
      DerivativeMessage msg{j, static_cast<uint64_t>(sites[static_cast<size_t>(j)]->n()),
                            eval.grad, eval.hess};
      fit.transcript.record(2, msg);
      derivatives.push_back(std::move(msg));
    } catch (const std::exception& e) {
      throw OdachRunError(std::string("odach phase 2 failed at site ") + std::to_string(j) +
                              ": " + e.what(),
                          2, j, fit.transcript);
    }
  }
  const GlobalDerivatives global = global_derivatives(derivatives);

  // Phase 3: per-site surrogate optimization.
  for (int j = 0; j < k; ++j) {
    try {
      SurrogateFitMessage msg = fit_surrogate(*sites[static_cast<size_t>(j)], fit.beta_bar,
                                              global.grad, global.hess, options);
      msg.site_id = j;
      fit.transcript.record(3, msg);
      fit.per_site.push_back(std::move(msg));
    } catch (const std::exception& e) {
      throw OdachRunError(std::string("odach phase 3 failed at site ") + std::to_string(j) +
                              ": " + e.what(),
                          3, j, fit.transcript);
    }
  }

  std::vector<CombinedEstimate> surrogate_estimates;
  for (const auto& m : fit.per_site)
    surrogate_estimates.push_back({m.beta_tilde, m.covariance_tilde});
  const CombinedEstimate final = inverse_variance_combine(surrogate_estimates);
  fit.beta_final = final.beta;
  fit.covariance_final = final.covariance;
  return fit;
}

}  // namespace fedsurv
