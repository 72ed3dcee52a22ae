#pragma once

#include <vector>

#include "cclqr/linalg.hpp"
#include "cclqr/probbounds.hpp"
#include "cclqr/sdp.hpp"

// Stationary linear feedback design under chance constraints.  The design
// problem is posed in the (X, Y) variables, X the stationary covariance
// bound and Y = K X, so that the stationarity condition and every
// constraint reformulation become linear matrix inequalities; the gain is
// recovered as K = Y X^{-1} afterward.

namespace cclqr {

namespace tol {
inline constexpr double jcc_reg = 1e-6;    // relative floor on inverse-shape eigenvalues
inline constexpr double sing_rel = 1e-10;  // relative floor for gain recovery
}  // namespace tol

struct SystemModel {
    Matrix A;  // n x n state transition
    Matrix B;  // n x m input map
    Matrix C;  // p x n measurement map (empty for state feedback)
    Matrix W;  // n x n disturbance covariance, positive definite
    Matrix V;  // p x p measurement noise covariance (with C only)

    int n() const { return int(A.rows()); }
    int m() const { return int(B.cols()); }
    int p() const { return int(C.rows()); }
    bool has_output() const { return C.size() > 0; }

    // Throws DimensionMismatch / NotSymmetric / NotPSD on malformed data.
    void validate() const;
};

struct CostSpec {
    Matrix Q;  // n x n, positive definite
    Matrix R;  // m x m, positive definite

    void validate(int n, int m) const;
};

enum class ConstraintTarget { State, Input };
enum class ConstraintForm { Scc, Jcc };

// One chance constraint.  Halfspace (Scc) constraints bound a'x (or a'u)
// by `bound`, one- or two-sided; ellipsoid (Jcc) constraints require
// x'inv(shape)x <= bound (resp. u).  `eps` is the admissible violation
// probability and `cls` selects the distributional assumption behind the
// variance-to-probability factor.
struct ChanceConstraint {
    ConstraintTarget target = ConstraintTarget::State;
    ConstraintForm form = ConstraintForm::Scc;
    Sidedness side = Sidedness::TwoSided;  // Scc only
    Vector direction;                      // Scc only
    Matrix shape;                          // Jcc only, symmetric positive definite
    double bound = 0.0;
    double eps = 0.0;
    DisturbanceClass cls = DisturbanceClass::NRM;

    static ChanceConstraint state_halfspace(const Vector& g, double h, Sidedness side,
                                            double eps, DisturbanceClass cls);
    static ChanceConstraint input_halfspace(const Vector& f, double e, Sidedness side,
                                            double eps, DisturbanceClass cls);
    static ChanceConstraint state_ellipsoid(const Matrix& G, double d, double eps,
                                            DisturbanceClass cls);
    static ChanceConstraint input_ellipsoid(const Matrix& F, double c, double eps,
                                            DisturbanceClass cls);

    void validate(int n, int m) const;
};

struct SynthesisResult {
    Matrix K;     // m x n feedback gain
    Matrix Xbar;  // stationary covariance of the closed loop
    Matrix Y;     // K * X at the optimizer
    double cost = 0.0;
    std::vector<int> active_constraints;  // indices with (near-)tight reformulations
    SdpSolution stats;
};

struct MinLevelResult {
    bool below_floor = false;  // infimum at or below tol::level_floor
    double eps_min = 0.0;      // clamped to [level_floor, 1 - level_floor]
    double factor = 0.0;       // optimal variance factor (alpha/beta/gamma)
    Matrix K_witness;          // gain attaining the reported level
    SdpSolution stats;
};

// K = Y X^{-1}; throws SingularX when lambda_min(X) <= sing_rel * ||X||.
Matrix recover_gain(const Matrix& X, const Matrix& Y);

// Floors eigenvalues of inv(G) below jcc_reg * max at the floor, keeping the
// ellipsoid shape positive definite even when some semiaxes are near-infinite
// slack directions.  Throws NotPSD when G has a nonpositive eigenvalue.
Matrix regularize_jcc_shape(const Matrix& G);

// The variance scaling factor of a constraint at its own eps.
double constraint_factor(const ChanceConstraint& con, int state_dim, int input_dim);

// Appends the closed-loop stationarity LMI
//   [ X - W, A X + B Y; (A X + B Y)', X ] >= 0
// to `p`; returns the LMI handle.
int add_stationarity_lmi(SdpProblem& p, const Matrix& A, const Matrix& B, const Matrix& W,
                         VarId X, VarId Y);

// Appends the LMI reformulation of `con` at a fixed factor value.
int add_constraint_lmi(SdpProblem& p, const ChanceConstraint& con, double factor, VarId X,
                       VarId Y, int state_dim, int input_dim);

// Same, with the factor as (tcoeff * t) for a scalar SDP variable t, as the
// minimum-level solves need.
int add_constraint_lmi_var(SdpProblem& p, const ChanceConstraint& con, VarId t, double tcoeff,
                           VarId X, VarId Y, int state_dim, int input_dim);

// Feasibility margin of the reformulated constraint at a concrete (X, K):
// smallest eigenvalue (or scalar slack) of the LMI; >= 0 means satisfied.
// `scale` (optional out) receives the natural magnitude for relative tests.
double constraint_margin(const ChanceConstraint& con, double factor, const Matrix& X,
                         const Matrix& K, double* scale = nullptr);

// Lowest admissible violation level of `con` over all stabilizing gains,
// holding every constraint in `fixed` at its own eps.  Bounded-variance
// classes minimize eps directly (the factor is linear in it); normal
// classes minimize the factor and invert it afterward, since eps enters
// through an inverse CDF.
MinLevelResult min_violation_level(const SystemModel& model, const ChanceConstraint& con,
                                   const std::vector<ChanceConstraint>& fixed = {});

// Minimum stationary cost E[x'Qx + u'Ru] without constraints; X at the
// optimum equals the stationary covariance of the optimal closed loop.
SynthesisResult synthesize_unconstrained(const SystemModel& model, const CostSpec& cost);

// Same objective subject to every constraint's LMI reformulation.  Throws
// Infeasible when the solver certifies there is no admissible gain; the
// message identifies constraints that are infeasible even in isolation.
SynthesisResult synthesize_constrained(const SystemModel& model, const CostSpec& cost,
                                       const std::vector<ChanceConstraint>& constraints);

// Exact stationary cost of a given stabilizing gain (Lyapunov-based).
double closed_loop_cost(const SystemModel& model, const CostSpec& cost, const Matrix& K,
                        Matrix* Xbar_out = nullptr);

}  // namespace cclqr
