#pragma once

#include "fedsurv/cox.hpp"
#include "fedsurv/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fedsurv {

// One-shot federated Cox estimation: every site broadcasts a local fit,
// all sites deterministically combine those into the initial value
// beta_bar, every site broadcasts its derivatives at beta_bar, each
// site maximizes the corrected (surrogate) likelihood, and the final
// estimate is the inverse-variance combination of the surrogate fits.
// Exactly three broadcast phases, 3K messages, no server.

struct LocalFitMessage {
  int site_id = 0;
  uint64_t n_j = 0;
  Eigen::VectorXd beta_hat;
  Eigen::MatrixXd covariance;
};

struct DerivativeMessage {
  int site_id = 0;
  uint64_t n_j = 0;
  Eigen::VectorXd grad_at_bar;
  Eigen::MatrixXd hess_at_bar;
};

struct SurrogateFitMessage {
  int site_id = 0;
  uint64_t n_j = 0;
  Eigen::VectorXd beta_tilde;
  Eigen::MatrixXd covariance_tilde;
};

using OdachMessage = std::variant<LocalFitMessage, DerivativeMessage, SurrogateFitMessage>;

// Wire format, little-endian: magic "ODCH", version u8, msg_type u8
// (1 = local fit, 2 = derivative, 3 = surrogate fit), site_id u31,
// p u32, n_j u64, then p + p*p IEEE-754 doubles (vector, then matrix
// row-major). Every message for a given p has the same byte size.
inline constexpr size_t kOdachHeaderBytes = 22;
inline constexpr uint8_t kOdachVersion = 1;

size_t odach_frame_bytes(int p);
std::vector<uint8_t> serialize_message(const OdachMessage& msg);
OdachMessage parse_message(std::span<const uint8_t> frame);

/// Schema audit: accepts a frame only if it is exactly a header plus
/// one p-vector and one p-by-p matrix. Anything shaped like per-record
/// data (any other payload length) throws.
void validate_frame(std::span<const uint8_t> frame, int expected_p = -1);

/// Ordered broadcast log; the only channel between sites. Frames are
/// validated on entry, so a dataset cannot be pushed through the bus.
class Transcript {
 public:
  void record(int phase, const OdachMessage& msg);
  void record_frame(int phase, std::vector<uint8_t> frame);

  struct Entry {
    int phase = 0;
    int site_id = 0;
    uint8_t msg_type = 0;
    std::vector<uint8_t> frame;
  };
  const std::vector<Entry>& entries() const { return entries_; }
  size_t total_bytes() const;
  std::vector<uint8_t> serialize() const;  // length-prefixed frames
  static Transcript deserialize(std::span<const uint8_t> bytes);

 private:
  std::vector<Entry> entries_;
};

struct CombinedEstimate {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
};

/// Meta-analytic inverse-variance combination:
/// beta = (sum V_j^-1)^-1 sum V_j^-1 beta_j, covariance (sum V_j^-1)^-1.
CombinedEstimate inverse_variance_combine(const std::vector<CombinedEstimate>& fits);

struct GlobalDerivatives {
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

/// n_j-weighted averages of the per-site derivative messages.
GlobalDerivatives global_derivatives(const std::vector<DerivativeMessage>& msgs);

/// Surrogate likelihood at one site: the local likelihood plus the
/// first- and second-order global-minus-local corrections at beta_bar.
double surrogate_log_likelihood(const SurvivalDataset& local_data, const Eigen::VectorXd& beta,
                                const Eigen::VectorXd& beta_bar,
                                const Eigen::VectorXd& global_grad,
                                const Eigen::MatrixXd& global_hess);

/// Newton-Raphson on the surrogate likelihood, initialized at beta_bar;
/// same convergence policy as fit_cox.
SurrogateFitMessage fit_surrogate(const SurvivalDataset& local_data,
                                  const Eigen::VectorXd& beta_bar,
                                  const Eigen::VectorXd& global_grad,
                                  const Eigen::MatrixXd& global_hess,
                                  const NewtonOptions& options = {});

struct FederatedFit {
  Eigen::VectorXd beta_bar;
  Eigen::VectorXd beta_final;
  Eigen::MatrixXd covariance_final;
  std::vector<SurrogateFitMessage> per_site;
  Transcript transcript;
};

/// Runs the full three-phase protocol over the sites' (already
/// transformed) datasets. A site failure aborts with the transcript of
/// the completed phases attached to the error.
FederatedFit run_odach(const std::vector<const SurvivalDataset*>& sites,
                       const NewtonOptions& options = {});

class OdachRunError : public std::runtime_error {
 public:
  OdachRunError(const std::string& what, int phase, int site_id, Transcript transcript)
      : std::runtime_error(what), phase(phase), site_id(site_id),
        transcript(std::move(transcript)) {}
  int phase;
  int site_id;
  Transcript transcript;
};

}  // namespace fedsurv
