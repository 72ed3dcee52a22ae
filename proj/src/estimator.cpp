#include "cclqr/estimator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "cclqr/errors.hpp"
#include "synth_detail.hpp"

namespace cclqr {

namespace {

void require_output(const SystemModel& model, const std::string& where) {
    if (!model.has_output())
        throw DimensionMismatch(where + ": the model carries no output (C, V)");
}

void require_design_dims(const SystemModel& model, const EstimatorDesign& design,
                         const std::string& where) {
    if (design.L.rows() != model.n() || design.L.cols() != model.p())
        throw DimensionMismatch(where + ": L must be n x p");
    if (design.E.rows() != model.n() || design.E.cols() != model.n())
        throw DimensionMismatch(where + ": E must be n x n");
}

// (LC) E (LC)' + L V L': the process noise seen by the estimate.
Matrix noise_floor(const SystemModel& model, const EstimatorDesign& design) {
    const Matrix LC = design.L * model.C;
    return symmetrize(LC * design.E * LC.transpose() +
                      design.L * model.V * design.L.transpose());
}

}  // namespace

Matrix kalman_riccati_map(const SystemModel& model, const Matrix& P) {
    require_output(model, "kalman_riccati_map");
    if (P.rows() != model.n() || P.cols() != model.n())
        throw DimensionMismatch("kalman_riccati_map: P must be n x n");
    const Matrix CP = model.C * P;
    const Matrix innov = symmetrize(CP * model.C.transpose() + model.V);
    const Matrix CPAt = CP * model.A.transpose();
    return symmetrize(model.A * P * model.A.transpose() -
                      CPAt.transpose() * innov.ldlt().solve(CPAt) + model.W);
}

EstimatorDesign design_kalman(const SystemModel& model) {
    model.validate();
    require_output(model, "design_kalman");

    Matrix P = symmetrize(model.W);
    bool settled = false;
    for (int it = 0; it < kf_max_iter; ++it) {
        const Matrix Pn = kalman_riccati_map(model, P);
        if (!Pn.allFinite()) break;
        const double step = (Pn - P).norm();
        P = Pn;
        if (step <= tol::kf * std::max(1.0, P.norm())) {
            settled = true;
            break;
        }
    }
    if (!settled)
        throw NotObservable("design_kalman: the Riccati iteration did not settle; (A, C) is "
                            "not detectable or the data are degenerate");

    EstimatorDesign d;
    d.E = P;
    const Matrix innov = symmetrize(model.C * P * model.C.transpose() + model.V);
    d.L = innov.ldlt().solve(model.C * P * model.A.transpose()).transpose();
    if (spectral_radius(Matrix(model.A - d.L * model.C)) >= 1.0)
        throw NotObservable("design_kalman: the converged gain leaves A - L C unstable");
    return d;
}

int add_kf_stationarity_lmi(SdpProblem& p, const SystemModel& model,
                            const EstimatorDesign& design, VarId S, VarId Z) {
    require_output(model, "add_kf_stationarity_lmi");
    require_design_dims(model, design, "add_kf_stationarity_lmi");
    return add_stationarity_lmi(p, model.A, model.B, noise_floor(model, design), S, Z);
}

int add_kf_coupling_lmi(SdpProblem& p, const EstimatorDesign& design, VarId X, VarId S) {
    const int n = int(design.E.rows());
    if (design.E.cols() != n) throw DimensionMismatch("add_kf_coupling_lmi: E must be square");
    const Matrix In = Matrix::Identity(n, n);
    const int lmi = p.add_lmi({n});
    p.lmi_add_constant(lmi, Matrix(-symmetrize(design.E)), 0, 0);
    p.lmi_add_term(lmi, X, In, In, 0, 0, false);
    p.lmi_add_term(lmi, S, Matrix(-In), In, 0, 0, false);
    return lmi;
}

std::pair<Matrix, Matrix> kf_stationary_covariances(const SystemModel& model, const Matrix& K,
                                                    const EstimatorDesign& design) {
    model.validate();
    require_output(model, "kf_stationary_covariances");
    require_design_dims(model, design, "kf_stationary_covariances");
    if (K.rows() != model.m() || K.cols() != model.n())
        throw DimensionMismatch("kf_stationary_covariances: K must be m x n");
    const Matrix Sbar =
        solve_discrete_lyapunov(Matrix(model.A + model.B * K), noise_floor(model, design));
    return {Sbar, symmetrize(Sbar + design.E)};
}

OutputFeedbackResult synthesize_output_feedback(const SystemModel& model0, const CostSpec& cost0,
                                                const std::vector<ChanceConstraint>& cons0) {
    model0.validate();
    require_output(model0, "synthesize_output_feedback");
    const int n = model0.n(), m = model0.m();
    cost0.validate(n, m);
    std::vector<double> factors;
    for (const auto& con : cons0) {
        con.validate(n, m);
        factors.push_back(constraint_factor(con, n, m));
    }

    const EstimatorDesign kf = design_kalman(model0);

    const detail::Frame fr = detail::make_frame(model0, nullptr, cons0);
    const SystemModel model = detail::scale_model(model0, fr);
    const CostSpec cost = detail::scale_cost(cost0, fr);
    EstimatorDesign kfz = kf;
    if (!fr.trivial) {
        kfz.L = fr.T * kf.L;
        kfz.E = symmetrize(fr.T * kf.E * fr.T);
    }

    // Variables: S the estimate covariance, Z = K S, and P standing in for
    // the input cost block.  The state covariance bound X never needs its
    // own variable: the objective and every state-side reformulation are
    // monotone in X, so the optimum pins X = S + E and the substitution is
    // exact.  Carrying X explicitly leaves the coupling block X - S - E
    // identically zero at the optimum, which stalls the interior-point
    // iteration well short of gain-recovery accuracy.
    struct Vars {
        SdpProblem p;
        VarId S{}, Z{};
    };
    const auto make_vars = [&]() {
        Vars v;
        v.S = v.p.add_symmetric(n, "S");
        v.Z = v.p.add_rect(m, n, "Z");
        add_kf_stationarity_lmi(v.p, model, kfz, v.S, v.Z);
        return v;
    };
    const auto add_scaled_constraint = [&](Vars& v, const ChanceConstraint& con, double factor) {
        const ChanceConstraint sc = detail::scale_constraint(con, fr);
        const int lmi = add_constraint_lmi(v.p, sc, factor, v.S, v.Z, n, m);
        if (sc.target == ConstraintTarget::State) {
            // Shift the reformulation from S to S + E.
            if (sc.form == ConstraintForm::Scc) {
                Matrix shift(1, 1);
                shift << -sc.direction.dot(kfz.E * sc.direction);
                v.p.lmi_add_constant(lmi, shift, 0, 0);
            } else {
                v.p.lmi_add_constant(lmi, Matrix(-kfz.E), 0, 0);
            }
        }
    };

    Vars vars = make_vars();
    SdpProblem& p = vars.p;
    VarId P = p.add_symmetric(m, "P");
    p.objective_add(vars.S, cost.Q);
    p.objective_add(P, Matrix::Identity(m, m));

    const Matrix Rhalf = sqrt_psd(cost.R);
    const Matrix In = Matrix::Identity(n, n), Im = Matrix::Identity(m, m);
    const int cost_lmi = p.add_lmi({m, n});
    p.lmi_add_term(cost_lmi, P, Im, Im, 0, 0, false);
    p.lmi_add_term(cost_lmi, vars.Z, Rhalf, In, 0, 1, true);
    p.lmi_add_term(cost_lmi, vars.S, In, In, 1, 1, false);

    for (size_t i = 0; i < cons0.size(); ++i) add_scaled_constraint(vars, cons0[i], factors[i]);

    const SdpSolution sol = detail::solve_staged(p);
    if (sol.status == SdpStatus::Infeasible) {
        std::vector<int> alone;
        for (size_t i = 0; i < cons0.size(); ++i) {
            Vars probe = make_vars();
            probe.p.objective_add(probe.S, Matrix::Identity(n, n));
            add_scaled_constraint(probe, cons0[i], factors[i]);
            if (detail::solve_staged(probe.p).status == SdpStatus::Infeasible)
                alone.push_back(int(i));
        }
        std::ostringstream os;
        os << "output-feedback synthesis is infeasible at the requested levels";
        if (!alone.empty()) {
            os << "; constraints infeasible in isolation:";
            for (int i : alone) os << ' ' << i;
        } else if (!cons0.empty()) {
            os << "; the constraints are jointly infeasible (none alone)";
        }
        throw Infeasible(os.str());
    }
    if (sol.status != SdpStatus::Optimal)
        detail::throw_solver_failure(sol, "synthesize_output_feedback");

    const Matrix Ks = recover_gain(sol.value(vars.S), sol.value(vars.Z));
    OutputFeedbackResult out;
    out.K = fr.trivial ? Ks : Matrix(Ks * fr.T);
    out.L = kf.L;
    out.E = kf.E;
    std::tie(out.Sbar, out.Xbar) = kf_stationary_covariances(model0, out.K, kf);
    out.cost = (cost0.Q * out.Xbar).trace() +
               (out.K.transpose() * cost0.R * out.K * out.Sbar).trace();
    out.stats = sol;
    for (size_t i = 0; i < cons0.size(); ++i) {
        const Matrix& cov = cons0[i].target == ConstraintTarget::State ? out.Xbar : out.Sbar;
        double scale = 1.0;
        const double margin = constraint_margin(cons0[i], factors[i], cov, out.K, &scale);
        if (margin <= 1e-6 * scale) out.active_constraints.push_back(int(i));
    }
    return out;
}

}  // namespace cclqr
