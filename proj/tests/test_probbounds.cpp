#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cclqr/probbounds.hpp"

using cclqr::DisturbanceClass;
using cclqr::FactorKind;
using cclqr::Sidedness;

TEST_CASE("inverse standard normal CDF") {
    CHECK(cclqr::inv_std_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cclqr::inv_std_normal_cdf(0.9) == doctest::Approx(1.2815515655446004).epsilon(1e-10));
    CHECK_THROWS_AS((void)cclqr::inv_std_normal_cdf(1.0), cclqr::OutOfRange);
    CHECK_THROWS_AS((void)cclqr::inv_std_normal_cdf(0.0), cclqr::OutOfRange);

    // Certified residual across a grid, including the tails.
    for (double p : {1e-9, 1e-6, 1e-3, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-6, 1.0 - 1e-9}) {
        double z = cclqr::inv_std_normal_cdf(p);
        CHECK(std::abs(cclqr::std_normal_cdf(z) - p) <= cclqr::tol::cdf);
    }
}

TEST_CASE("inverse chi-squared CDF") {
    // n = 2 closed form: F(x) = 1 - exp(-x/2).
    CHECK(cclqr::inv_chi_squared_cdf(2, 0.9) == doctest::Approx(-2.0 * std::log(0.1)).epsilon(1e-10));
    // n = 1 via the square of a standard normal.
    double z95 = cclqr::inv_std_normal_cdf(0.95);
    CHECK(cclqr::inv_chi_squared_cdf(1, 0.9) == doctest::Approx(z95 * z95).epsilon(1e-9));
    // Median of chi2_3 certifies through the forward CDF.
    double x = cclqr::inv_chi_squared_cdf(3, 0.5);
    CHECK(std::abs(cclqr::chi_squared_cdf(3, x) - 0.5) <= cclqr::tol::cdf);

    CHECK_THROWS_AS((void)cclqr::inv_chi_squared_cdf(0, 0.5), cclqr::OutOfRange);
    CHECK_THROWS_AS((void)cclqr::inv_chi_squared_cdf(2, -0.1), cclqr::OutOfRange);

    for (int n : {1, 2, 3, 5, 10}) {
        for (double p : {1e-6, 0.01, 0.3, 0.7, 0.999}) {
            double q = cclqr::inv_chi_squared_cdf(n, p);
            CHECK(std::abs(cclqr::chi_squared_cdf(n, q) - p) <= cclqr::tol::cdf);
        }
    }
}

TEST_CASE("single-constraint factors reproduce the reference table") {
    CHECK(cclqr::scc_factor(DisturbanceClass::WSS, Sidedness::OneSided, 0.1) == doctest::Approx(0.2));
    CHECK(cclqr::scc_factor(DisturbanceClass::WSS, Sidedness::TwoSided, 0.1) == doctest::Approx(0.1));

    double z = cclqr::inv_std_normal_cdf(0.9);
    CHECK(cclqr::scc_factor(DisturbanceClass::NRM, Sidedness::OneSided, 0.1) ==
          doctest::Approx(1.0 / (z * z)).epsilon(1e-12));
    CHECK(cclqr::scc_factor(DisturbanceClass::NRM, Sidedness::OneSided, 0.1) ==
          doctest::Approx(0.6088745603777448).epsilon(1e-9));

    double z2 = cclqr::inv_std_normal_cdf(0.95);
    CHECK(cclqr::scc_factor(DisturbanceClass::NRM, Sidedness::TwoSided, 0.1) ==
          doctest::Approx(1.0 / (z2 * z2)).epsilon(1e-12));

    CHECK_THROWS_AS((void)cclqr::scc_factor(DisturbanceClass::WSS, Sidedness::OneSided, 0.5),
                    cclqr::OutOfRange);
    CHECK_THROWS_AS((void)cclqr::scc_factor(DisturbanceClass::NRM, Sidedness::OneSided, 0.6),
                    cclqr::OutOfRange);
    CHECK_THROWS_AS((void)cclqr::scc_factor(DisturbanceClass::WSS, Sidedness::TwoSided, 0.0),
                    cclqr::OutOfRange);
}

TEST_CASE("joint-constraint factors") {
    CHECK(cclqr::jcc_factor(DisturbanceClass::WSS, 2, 0.1) == doctest::Approx(0.05));
    CHECK(cclqr::jcc_factor(DisturbanceClass::WSS, 4, 0.2) == doctest::Approx(0.05));
    CHECK(cclqr::jcc_factor(DisturbanceClass::NRM, 2, 0.1) ==
          doctest::Approx(1.0 / 4.605170185988091).epsilon(1e-10));
}

TEST_CASE("level_from_factor inverts the factor maps") {
    CHECK(cclqr::level_from_factor(DisturbanceClass::WSS, FactorKind::SccOneSided, 1, 0.2) ==
          doctest::Approx(0.1));
    CHECK(cclqr::level_from_factor(DisturbanceClass::NRM, FactorKind::Jcc, 2, 0.21714724095162588) ==
          doctest::Approx(0.1).epsilon(1e-9));
    CHECK_THROWS_AS(
        (void)cclqr::level_from_factor(DisturbanceClass::WSS, FactorKind::SccTwoSided, 1, 0.0),
        cclqr::OutOfRange);

    // Round trips across classes, kinds and levels.
    for (double eps : {0.01, 0.1, 0.3}) {
        for (int n : {1, 3}) {
            double g = cclqr::jcc_factor(DisturbanceClass::NRM, n, eps);
            CHECK(cclqr::level_from_factor(DisturbanceClass::NRM, FactorKind::Jcc, n, g) ==
                  doctest::Approx(eps).epsilon(1e-9));
            double gw = cclqr::jcc_factor(DisturbanceClass::WSS, n, eps);
            CHECK(cclqr::level_from_factor(DisturbanceClass::WSS, FactorKind::Jcc, n, gw) ==
                  doctest::Approx(eps).epsilon(1e-12));
        }
        double a1 = cclqr::scc_factor(DisturbanceClass::NRM, Sidedness::OneSided, eps);
        CHECK(cclqr::level_from_factor(DisturbanceClass::NRM, FactorKind::SccOneSided, 1, a1) ==
              doctest::Approx(eps).epsilon(1e-9));
        double a2 = cclqr::scc_factor(DisturbanceClass::NRM, Sidedness::TwoSided, eps);
        CHECK(cclqr::level_from_factor(DisturbanceClass::NRM, FactorKind::SccTwoSided, 1, a2) ==
              doctest::Approx(eps).epsilon(1e-9));
    }

    // Results clamp to the representable level band.
    CHECK(cclqr::level_from_factor(DisturbanceClass::WSS, FactorKind::SccTwoSided, 1, 1e-15) ==
          doctest::Approx(cclqr::tol::level_floor));
    CHECK(cclqr::level_from_factor(DisturbanceClass::WSS, FactorKind::SccTwoSided, 1, 5.0) ==
          doctest::Approx(1.0 - cclqr::tol::level_floor));
}

TEST_CASE("factors are monotone in eps and ordered across classes/sides") {
    double prev_w1 = 0.0, prev_w2 = 0.0, prev_n1 = 0.0, prev_n2 = 0.0;
    for (double eps = 0.01; eps <= 0.35 + 1e-12; eps += 0.01) {
        double w1 = cclqr::scc_factor(DisturbanceClass::WSS, Sidedness::OneSided, eps);
        double w2 = cclqr::scc_factor(DisturbanceClass::WSS, Sidedness::TwoSided, eps);
        double n1 = cclqr::scc_factor(DisturbanceClass::NRM, Sidedness::OneSided, eps);
        double n2 = cclqr::scc_factor(DisturbanceClass::NRM, Sidedness::TwoSided, eps);
        CHECK(w1 > prev_w1);
        CHECK(w2 > prev_w2);
        CHECK(n1 > prev_n1);
        CHECK(n2 > prev_n2);
        // One-sided factors are the looser (larger) ones.
        CHECK(w1 >= w2);
        CHECK(n1 >= n2);
        prev_w1 = w1;
        prev_w2 = w2;
        prev_n1 = n1;
        prev_n2 = n2;

        for (int n = 1; n <= 6; ++n) {
            CHECK(cclqr::jcc_factor(DisturbanceClass::NRM, n, eps) >=
                  cclqr::jcc_factor(DisturbanceClass::WSS, n, eps));
        }
    }

    for (int n = 1; n <= 6; ++n) {
        double prev = 0.0;
        for (double eps = 0.01; eps <= 0.35 + 1e-12; eps += 0.01) {
            double g = cclqr::jcc_factor(DisturbanceClass::NRM, n, eps);
            CHECK(g > prev);
            prev = g;
        }
    }
}

TEST_CASE("curve table spans the requested grid") {
    auto curve = cclqr::factor_curve(FactorKind::Jcc, DisturbanceClass::WSS, 2, 0.05, 0.35, 0.05);
    REQUIRE(curve.size() == 7);
    CHECK(curve.front().eps == doctest::Approx(0.05));
    CHECK(curve.back().eps == doctest::Approx(0.35));
    CHECK(curve[3].factor == doctest::Approx(0.1));  // eps = 0.2, n = 2

    CHECK_THROWS_AS((void)cclqr::factor_curve(FactorKind::Jcc, DisturbanceClass::WSS, 2, 0.0, 0.3, 0.1),
                    cclqr::OutOfRange);
}
