#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cclqr/linalg.hpp"

using cclqr::Matrix;
using cclqr::Vector;

namespace {

Matrix random_matrix(std::mt19937& rng, int n, int m) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix M(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) M(i, j) = gauss(rng);
    return M;
}

Matrix random_stable(std::mt19937& rng, int n, double target_rho) {
    Matrix A = random_matrix(rng, n, n);
    double rho = cclqr::spectral_radius(A);
    if (rho < 1e-12) rho = 1e-12;
    return A * (target_rho / rho);
}

Matrix random_psd(std::mt19937& rng, int n) {
    Matrix G = random_matrix(rng, n, n);
    return cclqr::symmetrize(G.transpose() * G);
}

}  // namespace

TEST_CASE("symmetrize averages with the transpose") {
    Matrix M(2, 2);
    M << 1.0, 2.0, 0.0, 3.0;
    Matrix S = cclqr::symmetrize(M);
    CHECK(S(0, 1) == doctest::Approx(1.0));
    CHECK(S(1, 0) == doctest::Approx(1.0));
    CHECK(cclqr::is_symmetric(S));
}

TEST_CASE("spectral radius on reference matrices") {
    CHECK(cclqr::spectral_radius(Matrix::Identity(3, 3)) == doctest::Approx(1.0));

    Matrix D = Matrix::Zero(2, 2);
    D(0, 0) = 0.5;
    D(1, 1) = -0.9;
    CHECK(cclqr::spectral_radius(D) == doctest::Approx(0.9));

    // Companion of lambda^2 + 0.25: complex pair with modulus 0.5.
    Matrix C(2, 2);
    C << 0.0, 1.0, -0.25, 0.0;
    CHECK(cclqr::spectral_radius(C) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("is_psd basics") {
    CHECK(cclqr::is_psd(Matrix::Zero(3, 3), 1e-9));

    Matrix D = Matrix::Zero(2, 2);
    D(0, 0) = 1.0;
    D(1, 1) = -1e-3;
    CHECK_FALSE(cclqr::is_psd(D, 1e-9));

    Matrix notsym(2, 2);
    notsym << 0.0, 1.0, -1.0, 0.0;
    CHECK_THROWS_AS((void)cclqr::is_psd(notsym, 1e-9), cclqr::NotSymmetric);
}

TEST_CASE("sqrt_psd on diagonal and dense inputs") {
    CHECK((cclqr::sqrt_psd(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm() ==
          doctest::Approx(0.0).epsilon(1e-12));

    Matrix D = Matrix::Zero(2, 2);
    D(0, 0) = 4.0;
    D(1, 1) = 9.0;
    Matrix S = cclqr::sqrt_psd(D);
    CHECK(S(0, 0) == doctest::Approx(2.0));
    CHECK(S(1, 1) == doctest::Approx(3.0));

    Matrix M(2, 2);
    M << 2.0, 1.0, 1.0, 2.0;
    Matrix R = cclqr::sqrt_psd(M);
    CHECK((R * R - M).norm() <= 1e-9);

    Matrix neg = Matrix::Identity(2, 2);
    neg(1, 1) = -0.5;
    CHECK_THROWS_AS((void)cclqr::sqrt_psd(neg), cclqr::NotPSD);
}

TEST_CASE("sqrt_psd round-trips 100 random PSD matrices") {
    std::mt19937 rng(12345);
    std::uniform_int_distribution<int> size(1, 8);
    for (int trial = 0; trial < 100; ++trial) {
        int n = size(rng);
        Matrix M = random_psd(rng, n);
        Matrix S = cclqr::sqrt_psd(M);
        CHECK(cclqr::is_symmetric(S));
        CHECK((S * S - M).norm() <= 1e-9 * std::max(1.0, M.norm()));
    }
}

TEST_CASE("discrete Lyapunov: zero dynamics returns W") {
    std::mt19937 rng(7);
    Matrix W = random_psd(rng, 4);
    Matrix X = cclqr::solve_discrete_lyapunov(Matrix::Zero(4, 4), W);
    CHECK((X - W).norm() <= 1e-12 * W.norm());
}

TEST_CASE("discrete Lyapunov: scalar closed form") {
    Matrix A(1, 1), W(1, 1);
    A << 0.5;
    W << 1.0;
    Matrix X = cclqr::solve_discrete_lyapunov(A, W);
    CHECK(X(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("discrete Lyapunov rejects marginally stable dynamics") {
    Matrix A(1, 1), W(1, 1);
    A << 1.0;
    W << 1.0;
    CHECK_THROWS_AS((void)cclqr::solve_discrete_lyapunov(A, W), cclqr::NotStable);
}

TEST_CASE("discrete Lyapunov matches the plain recursion and dominates W") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> size(1, 6);
    std::uniform_real_distribution<double> rho(0.1, 0.95);
    for (int trial = 0; trial < 25; ++trial) {
        int n = size(rng);
        Matrix A = random_stable(rng, n, rho(rng));
        Matrix W = random_psd(rng, n) + 1e-6 * Matrix::Identity(n, n);
        Matrix X = cclqr::solve_discrete_lyapunov(A, W);

        CHECK(cclqr::is_symmetric(X));
        CHECK((X - A * X * A.transpose() - W).norm() <= cclqr::tol::lyap * std::max(1.0, W.norm()));

        // Plain recursion from zero, run to convergence.
        Matrix Xk = Matrix::Zero(n, n);
        for (int k = 0; k < 20000; ++k) {
            Matrix next = A * Xk * A.transpose() + W;
            if ((next - Xk).norm() <= 1e-14 * std::max(1.0, next.norm()) && k > 10) {
                Xk = next;
                break;
            }
            Xk = next;
        }
        CHECK((X - Xk).norm() <= 10.0 * cclqr::tol::lyap * std::max(1.0, Xk.norm()));

        // X dominates W for W > 0.
        CHECK(cclqr::is_psd(X - W, 1e-8 * std::max(1.0, X.norm())));
    }
}

TEST_CASE("dimension mismatches are reported") {
    Matrix A = Matrix::Zero(2, 3);
    CHECK_THROWS_AS((void)cclqr::spectral_radius(A), cclqr::DimensionMismatch);
    CHECK_THROWS_AS((void)cclqr::solve_discrete_lyapunov(Matrix::Zero(2, 2), Matrix::Zero(3, 3)),
                    cclqr::DimensionMismatch);
}
