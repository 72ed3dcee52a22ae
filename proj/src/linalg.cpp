#include "cclqr/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace cclqr {

namespace {

void require_finite(const Matrix& M, const char* who) {
    if (!M.allFinite()) {
        std::ostringstream os;
        os << who << ": matrix has non-finite entries";
        throw Error(os.str());
    }
}

void require_square(const Matrix& M, const char* who) {
    if (M.rows() != M.cols()) {
        std::ostringstream os;
        os << who << ": expected square matrix, got " << M.rows() << "x" << M.cols();
        throw DimensionMismatch(os.str());
    }
}

}  // namespace

Matrix symmetrize(const Matrix& M) {
    require_square(M, "symmetrize");
    return 0.5 * (M + M.transpose());
}

bool is_symmetric(const Matrix& M, double rel_tol) {
    if (M.rows() != M.cols()) return false;
    const double scale = std::max(1.0, M.norm());
    return (M - M.transpose()).norm() <= rel_tol * scale;
}

double spectral_radius(const Matrix& M) {
    require_square(M, "spectral_radius");
    require_finite(M, "spectral_radius");
    if (M.rows() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_psd(const Matrix& M, double tol) {
    require_square(M, "is_psd");
    require_finite(M, "is_psd");
    if (!is_symmetric(M)) throw NotSymmetric("is_psd: matrix is not symmetric");
    if (M.rows() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

Matrix sqrt_psd(const Matrix& M) {
    require_square(M, "sqrt_psd");
    require_finite(M, "sqrt_psd");
    if (!is_symmetric(M)) throw NotSymmetric("sqrt_psd: matrix is not symmetric");
    if (M.rows() == 0) return M;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M));
    Vector lam = es.eigenvalues();
    const double floor = -tol::sqrt_psd * std::max(1.0, M.norm());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam[i] < floor) throw NotPSD("sqrt_psd: matrix has a negative eigenvalue");
        if (lam[i] < 0.0) lam[i] = 0.0;
    }
    Matrix S = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    return symmetrize(S);
}

Matrix solve_discrete_lyapunov(const Matrix& Acl, const Matrix& W) {
    require_square(Acl, "solve_discrete_lyapunov");
    require_finite(Acl, "solve_discrete_lyapunov");
    if (W.rows() != Acl.rows() || W.cols() != Acl.cols()) {
        throw DimensionMismatch("solve_discrete_lyapunov: W must match Acl in size");
    }
    if (!is_symmetric(W)) throw NotSymmetric("solve_discrete_lyapunov: W is not symmetric");
    const double rho = spectral_radius(Acl);
    if (rho >= 1.0 - tol::stab_margin) {
        std::ostringstream os;
        os << "solve_discrete_lyapunov: spectral radius " << rho << " is not < 1";
        throw NotStable(os.str());
    }

    // Doubling: X_{k+1} = X_k + A_k X_k A_k^T with A_{k+1} = A_k^2 sums the
    // series sum_j A^j W A^j^T in O(log) squarings.
    Matrix X = symmetrize(W);
    Matrix Ak = Acl;
    const double wnorm = std::max(1.0, W.norm());
    for (int iter = 0; iter < 128; ++iter) {
        Matrix step = Ak * X * Ak.transpose();
        X = symmetrize(X + step);
        Ak = Ak * Ak;
        // Remaining tail is Ak X* Ak^T; bound it by ||Ak||^2 ||X||.
        if (Ak.norm() * Ak.norm() * X.norm() <= 0.5 * tol::lyap * wnorm) break;
    }
    const double resid = (X - Acl * X * Acl.transpose() - W).norm();
    if (resid > tol::lyap * wnorm) {
        std::ostringstream os;
        os << "solve_discrete_lyapunov: residual " << resid << " exceeds tolerance";
        throw NumericalFailure(os.str());
    }
    return X;
}

}  // namespace cclqr
