#include "cclqr/probbounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cclqr {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Regularized lower incomplete gamma P(a, x), series branch (x < a + 1).
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 500; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x), Lentz continued fraction
// (x >= a + 1).
double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-17) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

// Monotone root find for cdf(x) = p on [lo, hi]: Newton damped by a
// maintained bracket, certified to tol::cdf on the CDF residual.
template <typename Cdf, typename Pdf>
double invert_cdf(Cdf cdf, Pdf pdf, double p, double lo, double hi, const char* who) {
    double flo = cdf(lo) - p;
    double fhi = cdf(hi) - p;
    if (flo > 0.0 || fhi < 0.0) {
        std::ostringstream os;
        os << who << ": probability " << p << " not bracketed";
        throw NumericalFailure(os.str());
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        double f = cdf(x) - p;
        if (std::abs(f) <= tol::cdf) return x;
        if (f > 0.0) hi = x;
        else lo = x;
        double deriv = pdf(x);
        double next = (deriv > 0.0) ? x - f / deriv : x;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    // Bisection has shrunk the bracket as far as doubles allow; accept the
    // midpoint if it certifies, otherwise report failure.
    if (std::abs(cdf(x) - p) <= tol::cdf) return x;
    std::ostringstream os;
    os << who << ": inverse CDF did not certify at p=" << p;
    throw NumericalFailure(os.str());
}

void require_prob_open(double p, const char* who) {
    if (!(p > 0.0 && p < 1.0)) {
        std::ostringstream os;
        os << who << ": probability must lie strictly in (0,1), got " << p;
        throw OutOfRange(os.str());
    }
}

}  // namespace

double std_normal_cdf(double z) {
    // 0.5*erfc(-z/sqrt(2)) is accurate in both tails.
    return 0.5 * std::erfc(-z / kSqrt2);
}

double chi_squared_cdf(int n, double x) {
    if (n < 1) throw OutOfRange("chi_squared_cdf: n must be >= 1");
    if (x <= 0.0) return 0.0;
    return gamma_p(0.5 * n, 0.5 * x);
}

double inv_std_normal_cdf(double p) {
    require_prob_open(p, "inv_std_normal_cdf");
    auto cdf = [](double z) { return std_normal_cdf(z); };
    auto pdf = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); };
    return invert_cdf(cdf, pdf, p, -40.0, 40.0, "inv_std_normal_cdf");
}

double inv_chi_squared_cdf(int n, double p) {
    if (n < 1) throw OutOfRange("inv_chi_squared_cdf: n must be >= 1");
    require_prob_open(p, "inv_chi_squared_cdf");
    auto cdf = [n](double x) { return chi_squared_cdf(n, x); };
    const double a = 0.5 * n;
    auto pdf = [a](double x) {
        if (x <= 0.0) return 0.0;
        return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a));
    };
    // Upper bracket: grow from the mean until the CDF clears p.
    double hi = std::max(1.0, double(n));
    while (cdf(hi) < p && hi < 1e8) hi *= 2.0;
    return invert_cdf(cdf, pdf, p, 0.0, hi, "inv_chi_squared_cdf");
}

double scc_factor(DisturbanceClass cls, Sidedness side, double eps) {
    require_prob_open(eps, "scc_factor");
    if (side == Sidedness::OneSided && eps >= 0.5) {
        // WSS: the symmetric tail split is only a tail bound below 1/2.
        // NRM: the inverse-normal argument 1-eps must exceed 1/2 for a
        // positive quantile; beyond that the constraint is vacuous.
        throw OutOfRange("scc_factor: one-sided levels require eps < 0.5");
    }
    switch (cls) {
        case DisturbanceClass::WSS:
            return side == Sidedness::OneSided ? 2.0 * eps : eps;
        case DisturbanceClass::NRM: {
            const double q = side == Sidedness::OneSided ? 1.0 - eps : 1.0 - 0.5 * eps;
            const double z = inv_std_normal_cdf(q);
            return 1.0 / (z * z);
        }
    }
    throw OutOfRange("scc_factor: unknown disturbance class");
}

double jcc_factor(DisturbanceClass cls, int n, double eps) {
    if (n < 1) throw OutOfRange("jcc_factor: dimension must be >= 1");
    require_prob_open(eps, "jcc_factor");
    switch (cls) {
        case DisturbanceClass::WSS:
            return eps / double(n);
        case DisturbanceClass::NRM:
            return 1.0 / inv_chi_squared_cdf(n, 1.0 - eps);
    }
    throw OutOfRange("jcc_factor: unknown disturbance class");
}

double level_from_factor(DisturbanceClass cls, FactorKind kind, int n, double factor) {
    if (!(factor > 0.0)) throw OutOfRange("level_from_factor: factor must be positive");
    const auto clamp = [](double eps) {
        return std::clamp(eps, tol::level_floor, 1.0 - tol::level_floor);
    };
    if (cls == DisturbanceClass::WSS) {
        switch (kind) {
            case FactorKind::SccOneSided: return clamp(0.5 * factor);
            case FactorKind::SccTwoSided: return clamp(factor);
            case FactorKind::Jcc:
                if (n < 1) throw OutOfRange("level_from_factor: dimension must be >= 1");
                return clamp(factor * double(n));
        }
    } else {
        switch (kind) {
            case FactorKind::SccOneSided:
                return clamp(1.0 - std_normal_cdf(1.0 / std::sqrt(factor)));
            case FactorKind::SccTwoSided:
                return clamp(2.0 * (1.0 - std_normal_cdf(1.0 / std::sqrt(factor))));
            case FactorKind::Jcc:
                if (n < 1) throw OutOfRange("level_from_factor: dimension must be >= 1");
                return clamp(1.0 - chi_squared_cdf(n, 1.0 / factor));
        }
    }
    throw OutOfRange("level_from_factor: unknown kind");
}

std::vector<CurvePoint> factor_curve(FactorKind kind, DisturbanceClass cls, int n,
                                     double eps_begin, double eps_end, double eps_step) {
    if (!(eps_step > 0.0) || !(eps_begin > 0.0) || !(eps_end < 1.0) || eps_begin > eps_end) {
        throw OutOfRange("factor_curve: grid must satisfy 0 < begin <= end < 1 with positive step");
    }
    std::vector<CurvePoint> out;
    // Walk by index so accumulated rounding cannot skip the endpoint.
    const long steps = std::lround(std::floor((eps_end - eps_begin) / eps_step + 1e-12));
    for (long i = 0; i <= steps; ++i) {
        const double eps = eps_begin + double(i) * eps_step;
        double f;
        if (kind == FactorKind::Jcc) {
            f = jcc_factor(cls, n, eps);
        } else {
            f = scc_factor(cls, kind == FactorKind::SccOneSided ? Sidedness::OneSided
                                                                : Sidedness::TwoSided,
                           eps);
        }
        out.push_back({eps, f});
    }
    return out;
}

}  // namespace cclqr
