#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cclqr/sdp.hpp"

using cclqr::Matrix;
using cclqr::SdpProblem;
using cclqr::SdpSettings;
using cclqr::SdpStatus;
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

// min Tr(X) s.t. [X - W, Acl X; X Acl', X] >= 0 — the fixed-gain
// stationary-covariance program whose optimum is the Lyapunov solution.
SdpProblem lyapunov_sdp(const Matrix& Acl, const Matrix& W, cclqr::VarId* xout) {
    const int n = int(Acl.rows());
    SdpProblem p;
    auto X = p.add_symmetric(n, "X");
    if (xout) *xout = X;
    p.objective_add(X, Matrix::Identity(n, n));
    int lmi = p.add_lmi({n, n});
    p.lmi_add_constant(lmi, -W, 0, 0);
    p.lmi_add_term(lmi, X, Matrix::Identity(n, n), Matrix::Identity(n, n), 0, 0, false);
    p.lmi_add_term(lmi, X, Acl, Matrix::Identity(n, n), 0, 1, true);
    p.lmi_add_term(lmi, X, Matrix::Identity(n, n), Matrix::Identity(n, n), 1, 1, false);
    return p;
}

}  // namespace

TEST_CASE("scalar bound: minimize x subject to x >= 1") {
    SdpProblem p;
    auto x = p.add_scalar("x");
    p.objective_add(x, 1.0);
    int lmi = p.add_lmi({1});
    Matrix m1(1, 1);
    m1 << -1.0;
    p.lmi_add_constant(lmi, m1);
    Matrix one(1, 1);
    one << 1.0;
    p.lmi_add_term(lmi, x, one, one, 0, 0, false);

    auto sol = p.solve();
    REQUIRE(sol.status == SdpStatus::Optimal);
    CHECK(sol.scalar(x) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.objective_value == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.duality_gap <= 1e-6);
}

TEST_CASE("trace minimization against a PSD lower bound") {
    SdpProblem p;
    auto X = p.add_symmetric(2, "X");
    p.objective_add(X, Matrix::Identity(2, 2));
    Matrix M = Matrix::Zero(2, 2);
    M(0, 0) = 1.0;
    M(1, 1) = 2.0;
    int lmi = p.add_lmi({2});
    p.lmi_add_constant(lmi, -M);
    p.lmi_add_term(lmi, X, Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0, 0, false);

    auto sol = p.solve();
    REQUIRE(sol.status == SdpStatus::Optimal);
    CHECK(sol.objective_value == doctest::Approx(3.0).epsilon(1e-7));
    CHECK((sol.value(X) - M).norm() <= 1e-6);
}

TEST_CASE("largest eigenvalue as an SDP") {
    // minimize t with t*I - M >= 0; t enters the diagonal as sum_i e_i t e_i'.
    std::mt19937 rng(42);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 2 + trial % 5;
        Matrix M = cclqr::symmetrize(random_matrix(rng, n, n));
        Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
        const double lmax = es.eigenvalues().maxCoeff();

        SdpProblem p;
        auto t = p.add_scalar("t");
        p.objective_add(t, 1.0);
        int lmi = p.add_lmi({n});
        p.lmi_add_constant(lmi, -M);
        Matrix In = Matrix::Identity(n, n);
        for (int i = 0; i < n; ++i) p.lmi_add_term(lmi, t, In.col(i), In.row(i), 0, 0, false);

        auto sol = p.solve();
        REQUIRE(sol.status == SdpStatus::Optimal);
        CHECK(sol.scalar(t) == doctest::Approx(lmax).epsilon(1e-6));
    }
}

TEST_CASE("fixed-gain covariance SDPs match the Lyapunov oracle (50 instances)") {
    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> size(1, 6);
    std::uniform_real_distribution<double> rho(0.2, 0.95);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = size(rng);
        Matrix Acl = random_stable(rng, n, rho(rng));
        Matrix W = random_psd(rng, n) + 0.1 * Matrix::Identity(n, n);
        Matrix Xbar = cclqr::solve_discrete_lyapunov(Acl, W);

        cclqr::VarId xv;
        SdpProblem p = lyapunov_sdp(Acl, W, &xv);
        auto sol = p.solve();
        REQUIRE(sol.status == SdpStatus::Optimal);
        const double scale = 1.0 + Xbar.norm();
        CHECK((sol.value(xv) - Xbar).cwiseAbs().maxCoeff() <= 1e-6 * scale);

        // Post-solve verification certifies feasibility.
        auto vr = p.verify(sol.values, 1e-7);
        CHECK(vr.feasible);
        CHECK(vr.worst_violation <= 1e-7);

        // Inflating W by 2x makes the same values infeasible.
        SdpProblem p2 = lyapunov_sdp(Acl, Matrix(2.0 * W), nullptr);
        auto vr2 = p2.verify(sol.values, 1e-7);
        CHECK_FALSE(vr2.feasible);
    }
}

TEST_CASE("infeasible bound pair is certified Infeasible") {
    SdpProblem p;
    auto x = p.add_scalar("x");
    p.objective_add(x, 1.0);
    Matrix one(1, 1), mone(1, 1);
    one << 1.0;
    mone << -1.0;
    int l1 = p.add_lmi({1});  // x - 1 >= 0
    p.lmi_add_constant(l1, mone);
    p.lmi_add_term(l1, x, one, one, 0, 0, false);
    int l2 = p.add_lmi({1});  // -x - 1 >= 0
    p.lmi_add_constant(l2, mone);
    p.lmi_add_term(l2, x, -one, one, 0, 0, false);

    auto sol = p.solve();
    CHECK(sol.status == SdpStatus::Infeasible);
}

TEST_CASE("unbounded objective is certified Unbounded") {
    SdpProblem p;
    auto x = p.add_scalar("x");
    p.objective_add(x, 1.0);
    Matrix one(1, 1);
    one << 1.0;
    int l1 = p.add_lmi({1});  // 1 - x >= 0, so x -> -inf is feasible
    p.lmi_add_constant(l1, one);
    p.lmi_add_term(l1, x, -one, one, 0, 0, false);

    auto sol = p.solve();
    CHECK(sol.status == SdpStatus::Unbounded);
}

TEST_CASE("equality constraints are honored") {
    // minimize x11 + x22 s.t. x11 - x22 = 1, X >= 0, X <= 3*I.
    SdpProblem p;
    auto X = p.add_symmetric(2, "X");
    p.objective_add(X, Matrix::Identity(2, 2));
    int l1 = p.add_lmi({2});
    p.lmi_add_term(l1, X, Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0, 0, false);
    int l2 = p.add_lmi({2});
    p.lmi_add_constant(l2, Matrix(3.0 * Matrix::Identity(2, 2)));
    p.lmi_add_term(l2, X, Matrix(-Matrix::Identity(2, 2)), Matrix::Identity(2, 2), 0, 0, false);
    Matrix D = Matrix::Zero(2, 2);
    D(0, 0) = 1.0;
    D(1, 1) = -1.0;
    p.add_equality({{X, D}}, 1.0);

    auto sol = p.solve();
    REQUIRE(sol.status == SdpStatus::Optimal);
    const Matrix Xv = sol.value(X);
    CHECK(Xv(0, 0) - Xv(1, 1) == doctest::Approx(1.0).epsilon(1e-7));
    // Optimum: x22 = 0, x11 = 1.
    CHECK(sol.objective_value == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("malformed problems are rejected") {
    SdpProblem p;
    auto X = p.add_symmetric(2, "X");
    CHECK_THROWS_AS(p.objective_add(X, Matrix::Identity(3, 3)), cclqr::MalformedProblem);
    int lmi = p.add_lmi({2});
    CHECK_THROWS_AS(p.lmi_add_constant(lmi, Matrix::Identity(3, 3)), cclqr::MalformedProblem);
    CHECK_THROWS_AS(
        p.lmi_add_term(lmi, X, Matrix::Identity(2, 2), Matrix::Identity(3, 3), 0, 0, false),
        cclqr::MalformedProblem);
    CHECK_THROWS_AS(p.lmi_add_term(lmi, cclqr::VarId{7}, Matrix::Identity(2, 2),
                                   Matrix::Identity(2, 2), 0, 0, false),
                    cclqr::MalformedProblem);

    SdpProblem empty;
    CHECK_THROWS_AS((void)empty.solve(), cclqr::MalformedProblem);
}

TEST_CASE("standard-form export carries the problem data") {
    cclqr::VarId xv;
    Matrix Acl(1, 1), W(1, 1);
    Acl << 0.5;
    W << 1.0;
    SdpProblem p = lyapunov_sdp(Acl, W, &xv);
    std::string dump = p.export_text();
    CHECK(dump.find("sdp-export 1") != std::string::npos);
    CHECK(dump.find("coords 1") != std::string::npos);
    CHECK(dump.find("cones 1 2") != std::string::npos);
    CHECK(dump.find("end") != std::string::npos);
}
