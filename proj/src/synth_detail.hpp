#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "cclqr/synthesis.hpp"

// Shared internals of the synthesis front ends (state and output feedback):
// the ellipsoid-normalizing change of coordinates and the staged solve.
// Private to src/.

namespace cclqr::detail {

// State-space change of coordinates xs = T x with T symmetric positive
// definite.  Ellipsoidal state constraints with widely spread semiaxes
// make the raw LMIs numerically hopeless; solving in coordinates where the
// ellipsoid is the unit ball and mapping the gain back is exact.
struct Frame {
    Matrix T, Tinv;
    bool trivial = true;
};

inline Frame make_frame(const SystemModel& model, const ChanceConstraint* leveled,
                        const std::vector<ChanceConstraint>& fixed) {
    const ChanceConstraint* pick = nullptr;
    if (leveled && leveled->target == ConstraintTarget::State &&
        leveled->form == ConstraintForm::Jcc)
        pick = leveled;
    if (!pick) {
        for (const auto& con : fixed) {
            if (con.target == ConstraintTarget::State && con.form == ConstraintForm::Jcc) {
                pick = &con;
                break;
            }
        }
    }
    Frame fr;
    fr.T = Matrix::Identity(model.n(), model.n());
    fr.Tinv = fr.T;
    if (!pick) return fr;

    const Matrix Greg = regularize_jcc_shape(pick->shape);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Greg);
    const Vector lam = es.eigenvalues();
    fr.T = es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
    fr.Tinv = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    fr.T = symmetrize(fr.T);
    fr.Tinv = symmetrize(fr.Tinv);
    fr.trivial = false;
    return fr;
}

inline SystemModel scale_model(const SystemModel& model, const Frame& fr) {
    if (fr.trivial) return model;
    SystemModel out = model;
    out.A = fr.T * model.A * fr.Tinv;
    out.B = fr.T * model.B;
    out.W = symmetrize(fr.T * model.W * fr.T);
    if (model.has_output()) out.C = model.C * fr.Tinv;
    return out;
}

inline CostSpec scale_cost(const CostSpec& cost, const Frame& fr) {
    if (fr.trivial) return cost;
    return CostSpec{symmetrize(fr.Tinv * cost.Q * fr.Tinv), cost.R};
}

inline ChanceConstraint scale_constraint(const ChanceConstraint& con, const Frame& fr) {
    if (fr.trivial || con.target == ConstraintTarget::Input) return con;
    ChanceConstraint out = con;
    if (con.form == ConstraintForm::Scc)
        out.direction = fr.Tinv * con.direction;
    else
        out.shape = symmetrize(fr.T * con.shape * fr.T);
    return out;
}

// The duality gap enters the recovered gain through a flat direction of the
// objective, so gain accuracy is roughly the square root of the gap.  Solve
// tight first and fall back to the stock tolerances only if that stalls.
inline SdpSolution solve_staged(const SdpProblem& p) {
    SdpSettings tight;
    tight.feas_tol = 1e-10;
    tight.gap_tol = 1e-11;
    tight.max_iter = 300;
    SdpSolution sol = p.solve(tight);
    if (sol.status == SdpStatus::Optimal || sol.status == SdpStatus::Infeasible ||
        sol.status == SdpStatus::Unbounded)
        return sol;
    return p.solve();
}

[[noreturn]] inline void throw_solver_failure(const SdpSolution& sol, const std::string& where) {
    std::ostringstream os;
    os << where << ": solver returned " << to_string(sol.status) << " after " << sol.iterations
       << " iterations";
    throw NumericalFailure(os.str());
}

}  // namespace cclqr::detail
