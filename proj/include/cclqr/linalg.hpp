#pragma once

#include <Eigen/Dense>

#include "cclqr/errors.hpp"

namespace cclqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace tol {
// Double-precision headroom for the dense sizes handled here (n <= ~16).
inline constexpr double sym_rel = 1e-10;      // relative symmetry tolerance
inline constexpr double lyap = 1e-10;         // Lyapunov residual, relative
inline constexpr double eig = 1e-10;          // eigenvalue tolerance
inline constexpr double sqrt_psd = 1e-9;      // square-root residual
inline constexpr double stab_margin = 1e-9;   // strict-stability margin
}  // namespace tol

// (M + M^T)/2.  Kills asymmetry drift from iterative solvers.
Matrix symmetrize(const Matrix& M);

// True iff ||M - M^T|| <= rel_tol * max(1, ||M||) in Frobenius norm.
bool is_symmetric(const Matrix& M, double rel_tol = tol::sym_rel);

// max |lambda_i(M)| over the (possibly complex) spectrum.
double spectral_radius(const Matrix& M);

// True iff lambda_min(sym(M)) >= -tol.  Throws NotSymmetric when M is not
// symmetric within the relative symmetry tolerance.
bool is_psd(const Matrix& M, double tol = tol::eig);

// Symmetric PSD square root S with S*S = M.  Eigenvalues in
// [-sqrt_tol*||M||, 0) are clamped to zero; anything more negative throws
// NotPSD.
Matrix sqrt_psd(const Matrix& M);

// Solves X = Acl X Acl^T + W for the unique PSD X when rho(Acl) < 1,
// by fixed-point iteration with doubling.  Throws NotStable when
// rho(Acl) >= 1 - stab_margin.
Matrix solve_discrete_lyapunov(const Matrix& Acl, const Matrix& W);

}  // namespace cclqr
