#pragma once

#include <vector>

#include "cclqr/errors.hpp"

namespace cclqr {

enum class DisturbanceClass { WSS, NRM };
enum class Sidedness { OneSided, TwoSided };

// Which monotone level-to-factor map a factor came from.
enum class FactorKind { SccOneSided, SccTwoSided, Jcc };

namespace tol {
inline constexpr double cdf = 1e-12;          // inverse-CDF certification
inline constexpr double level_floor = 1e-9;   // smallest reportable level
}  // namespace tol

// Forward CDFs (exposed so the inverses can be certified independently).
double std_normal_cdf(double z);
double chi_squared_cdf(int n, double x);

// Inverse CDFs, certified: |CDF(result) - p| <= tol::cdf.
double inv_std_normal_cdf(double p);
double inv_chi_squared_cdf(int n, double p);

// Scaling factor alpha (state) / beta (input) turning a single linear
// chance constraint into a deterministic variance bound.  WSS one-sided
// requires eps < 0.5 (tail-bound validity); so does NRM one-sided, where
// the inverse-normal argument must stay positive.
double scc_factor(DisturbanceClass cls, Sidedness side, double eps);

// Scaling factor gamma for an ellipsoidal joint chance constraint in
// dimension n: eps/n (WSS) or 1/chi2inv_n(1-eps) (NRM).
double jcc_factor(DisturbanceClass cls, int n, double eps);

// Inverts the factor maps: given a factor, returns the violation level
// that produces it, clamped to [level_floor, 1 - level_floor].  n is the
// JCC dimension (ignored for SCC kinds).
double level_from_factor(DisturbanceClass cls, FactorKind kind, int n, double factor);

struct CurvePoint {
    double eps;
    double factor;
};

// Uniform-grid (eps, factor) table for plotting the bound curves.
// kind encodes SCC sidedness; n is the JCC dimension (ignored for SCCs).
std::vector<CurvePoint> factor_curve(FactorKind kind, DisturbanceClass cls, int n,
                                     double eps_begin, double eps_end, double eps_step);

}  // namespace cclqr
