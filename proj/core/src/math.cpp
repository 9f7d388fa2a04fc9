#include "fedsurv/math.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace fedsurv {

namespace {

constexpr double kTol = 1e-12;
constexpr int kMaxIter = 2000;

// Series expansion of P(a, x), valid and fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16 + kTol * 1e-4) {
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw std::runtime_error("regularized_gamma_p: series failed to converge");
}

// Modified Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_continued_fraction(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) {
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw std::runtime_error("regularized_gamma_q: continued fraction failed to converge");
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0)
    throw std::invalid_argument("regularized_gamma_p: require a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_continued_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0)
    throw std::invalid_argument("regularized_gamma_q: require a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_continued_fraction(a, x);
}

double chi_square_sf(double x, int df) {
  if (df < 1) throw std::invalid_argument("chi_square_sf: df must be >= 1");
  if (!(x > 0.0)) return 1.0;
  return regularized_gamma_q(0.5 * static_cast<double>(df), 0.5 * x);
}

long long round_half_away_from_zero(double x) {
  return static_cast<long long>(x >= 0.0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

namespace {

// Plain Cholesky with an explicit pivot floor so singularity is a
// detectable condition rather than a silently tiny pivot.
bool cholesky_factor(const Eigen::MatrixXd& a, double tol, Eigen::MatrixXd* l) {
  const Eigen::Index n = a.rows();
  double max_diag = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) max_diag = std::max(max_diag, std::fabs(a(i, i)));
  const double floor = std::max(tol * max_diag, 0.0);
  *l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= (*l)(j, k) * (*l)(j, k);
    if (!(d > floor) || !std::isfinite(d)) return false;
    (*l)(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= (*l)(i, k) * (*l)(j, k);
      (*l)(i, j) = s / (*l)(j, j);
    }
  }
  return true;
}

}  // namespace

std::optional<Eigen::MatrixXd> spd_inverse(const Eigen::MatrixXd& a, double tol) {
  if (a.rows() != a.cols()) throw std::invalid_argument("spd_inverse: matrix not square");
  Eigen::MatrixXd l;
  if (!cholesky_factor(a, tol, &l)) return std::nullopt;
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd inv = l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
  inv = l.transpose().triangularView<Eigen::Upper>().solve(inv);
  // Symmetrize against accumulated round-off.
  return (0.5 * (inv + inv.transpose())).eval();
}

std::optional<Eigen::VectorXd> spd_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                         double tol) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw std::invalid_argument("spd_solve: dimension mismatch");
  Eigen::MatrixXd l;
  if (!cholesky_factor(a, tol, &l)) return std::nullopt;
  Eigen::VectorXd y = l.triangularView<Eigen::Lower>().solve(b);
  return l.transpose().triangularView<Eigen::Upper>().solve(y).eval();
}

}  // namespace fedsurv
