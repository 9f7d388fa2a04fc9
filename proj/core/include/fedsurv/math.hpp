#pragma once

#include <Eigen/Core>

#include <optional>

namespace fedsurv {

/// Regularized lower incomplete gamma P(a, x), series/continued-fraction
/// hybrid, absolute tolerance 1e-12.
double regularized_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

/// Upper-tail probability of a chi-square variable with df degrees of
/// freedom. chi_square_sf(x, df) = Q(df/2, x/2); returns 1 for x <= 0.
double chi_square_sf(double x, int df);

/// Round half away from zero to the nearest integer.
long long round_half_away_from_zero(double x);

/// Inverse of a symmetric positive-definite matrix via Cholesky.
/// Returns nullopt when a pivot falls below tol times the largest
/// initial diagonal entry (the matrix is treated as singular).
std::optional<Eigen::MatrixXd> spd_inverse(const Eigen::MatrixXd& a, double tol = 1e-12);

/// Solve a x = b for symmetric positive-definite a; nullopt when singular.
std::optional<Eigen::VectorXd> spd_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                         double tol = 1e-12);

}  // namespace fedsurv
