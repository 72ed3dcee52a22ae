#include "cclqr/synthesis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "cclqr/errors.hpp"
#include "synth_detail.hpp"

namespace cclqr {

namespace {

using detail::Frame;
using detail::make_frame;
using detail::scale_constraint;
using detail::scale_cost;
using detail::scale_model;
using detail::solve_staged;
using detail::throw_solver_failure;

void require_sym_pd(const Matrix& M, const std::string& what) {
    if (M.rows() != M.cols()) throw DimensionMismatch(what + " must be square");
    if (!is_symmetric(M)) throw NotSymmetric(what + " must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M), Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0))
        throw NotPSD(what + " must be positive definite");
}

double min_eig(const Matrix& M) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Adds t * M at block (row, col) for a scalar variable t, one rank-one
// term per column.
void add_scalar_matrix_term(SdpProblem& p, int lmi, VarId t, const Matrix& M, int row, int col) {
    for (int j = 0; j < M.cols(); ++j) {
        Matrix R = Matrix::Zero(1, M.cols());
        R(0, j) = 1.0;
        p.lmi_add_term(lmi, t, Matrix(M.col(j)), R, row, col, row != col);
    }
}

struct Base {
    SdpProblem p;
    VarId X{}, Y{};
};

Base make_base(const SystemModel& model) {
    Base b;
    b.X = b.p.add_symmetric(model.n(), "X");
    b.Y = b.p.add_rect(model.m(), model.n(), "Y");
    add_stationarity_lmi(b.p, model.A, model.B, model.W, b.X, b.Y);
    return b;
}

}  // namespace

void SystemModel::validate() const {
    if (A.rows() != A.cols()) throw DimensionMismatch("A must be square");
    if (B.rows() != A.rows()) throw DimensionMismatch("B row count must match A");
    if (B.cols() < 1) throw DimensionMismatch("B must have at least one column");
    if (W.rows() != A.rows() || W.cols() != A.rows())
        throw DimensionMismatch("W must be n x n");
    require_sym_pd(W, "W");
    if (has_output()) {
        if (C.cols() != A.rows()) throw DimensionMismatch("C column count must match A");
        if (V.rows() != C.rows() || V.cols() != C.rows())
            throw DimensionMismatch("V must be p x p");
        require_sym_pd(V, "V");
    }
}

void CostSpec::validate(int n, int m) const {
    if (Q.rows() != n || Q.cols() != n) throw DimensionMismatch("Q must be n x n");
    if (R.rows() != m || R.cols() != m) throw DimensionMismatch("R must be m x m");
    require_sym_pd(Q, "Q");
    require_sym_pd(R, "R");
}

ChanceConstraint ChanceConstraint::state_halfspace(const Vector& g, double h, Sidedness side,
                                                   double eps, DisturbanceClass cls) {
    ChanceConstraint c;
    c.target = ConstraintTarget::State;
    c.form = ConstraintForm::Scc;
    c.side = side;
    c.direction = g;
    c.bound = h;
    c.eps = eps;
    c.cls = cls;
    return c;
}

ChanceConstraint ChanceConstraint::input_halfspace(const Vector& f, double e, Sidedness side,
                                                   double eps, DisturbanceClass cls) {
    ChanceConstraint c = state_halfspace(f, e, side, eps, cls);
    c.target = ConstraintTarget::Input;
    return c;
}

ChanceConstraint ChanceConstraint::state_ellipsoid(const Matrix& G, double d, double eps,
                                                   DisturbanceClass cls) {
    ChanceConstraint c;
    c.target = ConstraintTarget::State;
    c.form = ConstraintForm::Jcc;
    c.shape = G;
    c.bound = d;
    c.eps = eps;
    c.cls = cls;
    return c;
}

ChanceConstraint ChanceConstraint::input_ellipsoid(const Matrix& F, double cbound, double eps,
                                                   DisturbanceClass cls) {
    ChanceConstraint c = state_ellipsoid(F, cbound, eps, cls);
    c.target = ConstraintTarget::Input;
    return c;
}

void ChanceConstraint::validate(int n, int m) const {
    const int dim = target == ConstraintTarget::State ? n : m;
    if (!(bound > 0.0)) throw OutOfRange("constraint bound must be positive");
    if (form == ConstraintForm::Scc) {
        if (direction.size() != dim)
            throw DimensionMismatch("constraint direction length must match the target space");
        // A zero direction is allowed: the constraint is then trivially satisfiable.
    } else {
        if (shape.rows() != dim || shape.cols() != dim)
            throw DimensionMismatch("constraint shape must match the target space");
        if (!is_symmetric(shape)) throw NotSymmetric("constraint shape must be symmetric");
    }
}

Matrix recover_gain(const Matrix& X, const Matrix& Y) {
    if (X.rows() != X.cols() || Y.cols() != X.rows())
        throw DimensionMismatch("recover_gain: Y must be m x n with X n x n");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(X), Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(es.eigenvalues().minCoeff() > tol::sing_rel * lmax))
        throw SingularX("recover_gain: X is numerically singular");
    return symmetrize(X).ldlt().solve(Y.transpose()).transpose();
}

Matrix regularize_jcc_shape(const Matrix& G) {
    if (!is_symmetric(G)) throw NotSymmetric("ellipsoid shape must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(G));
    const Vector lam = es.eigenvalues();
    if (!(lam.minCoeff() > 0.0)) throw NotPSD("ellipsoid shape must be positive definite");
    Vector mu = lam.cwiseInverse();
    const double mu_floor = tol::jcc_reg * mu.maxCoeff();
    bool changed = false;
    for (int i = 0; i < mu.size(); ++i) {
        if (mu[i] < mu_floor) {
            mu[i] = mu_floor;
            changed = true;
        }
    }
    if (!changed) return symmetrize(G);
    return symmetrize(es.eigenvectors() * mu.cwiseInverse().asDiagonal() *
                      es.eigenvectors().transpose());
}

double constraint_factor(const ChanceConstraint& con, int state_dim, int input_dim) {
    if (con.form == ConstraintForm::Scc) return scc_factor(con.cls, con.side, con.eps);
    const int dim = con.target == ConstraintTarget::State ? state_dim : input_dim;
    return jcc_factor(con.cls, dim, con.eps);
}

int add_stationarity_lmi(SdpProblem& p, const Matrix& A, const Matrix& B, const Matrix& W,
                         VarId X, VarId Y) {
    const int n = int(A.rows());
    if (A.cols() != n || B.rows() != n || W.rows() != n || W.cols() != n)
        throw DimensionMismatch("add_stationarity_lmi: inconsistent model dimensions");
    const Matrix In = Matrix::Identity(n, n);
    const int lmi = p.add_lmi({n, n});
    p.lmi_add_constant(lmi, Matrix(-symmetrize(W)), 0, 0);
    p.lmi_add_term(lmi, X, In, In, 0, 0, false);
    p.lmi_add_term(lmi, X, A, In, 0, 1, true);
    p.lmi_add_term(lmi, Y, B, In, 0, 1, true);
    p.lmi_add_term(lmi, X, In, In, 1, 1, false);
    return lmi;
}

namespace {

// Shared structure of the four reformulations; the factor enters either as
// a constant or as tcoeff * t.
int add_con_lmi_impl(SdpProblem& p, const ChanceConstraint& con, const double* factor,
                     const VarId* t, double tcoeff, VarId X, VarId Y, int n, int m) {
    con.validate(n, m);
    const Matrix In = Matrix::Identity(n, n);
    Matrix one(1, 1);
    one << 1.0;

    if (con.target == ConstraintTarget::State && con.form == ConstraintForm::Scc) {
        // factor * h^2 - g' X g >= 0
        const int lmi = p.add_lmi({1});
        const double h2 = con.bound * con.bound;
        if (factor) {
            Matrix c0(1, 1);
            c0 << *factor * h2;
            p.lmi_add_constant(lmi, c0);
        } else {
            Matrix L(1, 1);
            L << tcoeff * h2;
            p.lmi_add_term(lmi, *t, L, one, 0, 0, false);
        }
        p.lmi_add_term(lmi, X, Matrix(-con.direction.transpose()), Matrix(con.direction), 0, 0,
                       false);
        return lmi;
    }
    if (con.target == ConstraintTarget::Input && con.form == ConstraintForm::Scc) {
        // [ factor * e^2, f' Y; Y' f, X ] >= 0
        const int lmi = p.add_lmi({1, n});
        const double e2 = con.bound * con.bound;
        if (factor) {
            Matrix c0(1, 1);
            c0 << *factor * e2;
            p.lmi_add_constant(lmi, c0);
        } else {
            Matrix L(1, 1);
            L << tcoeff * e2;
            p.lmi_add_term(lmi, *t, L, one, 0, 0, false);
        }
        p.lmi_add_term(lmi, Y, Matrix(con.direction.transpose()), In, 0, 1, true);
        p.lmi_add_term(lmi, X, In, In, 1, 1, false);
        return lmi;
    }
    if (con.target == ConstraintTarget::State) {
        // factor * d * G - X >= 0
        const Matrix Greg = regularize_jcc_shape(con.shape);
        const int lmi = p.add_lmi({n});
        if (factor)
            p.lmi_add_constant(lmi, Matrix(*factor * con.bound * Greg));
        else
            add_scalar_matrix_term(p, lmi, *t, Matrix(tcoeff * con.bound * Greg), 0, 0);
        p.lmi_add_term(lmi, X, Matrix(-In), In, 0, 0, false);
        return lmi;
    }
    // [ factor * c * F, Y; Y', X ] >= 0
    const Matrix Freg = regularize_jcc_shape(con.shape);
    const Matrix Im = Matrix::Identity(m, m);
    const int lmi = p.add_lmi({m, n});
    if (factor)
        p.lmi_add_constant(lmi, Matrix(*factor * con.bound * Freg));
    else
        add_scalar_matrix_term(p, lmi, *t, Matrix(tcoeff * con.bound * Freg), 0, 0);
    p.lmi_add_term(lmi, Y, Im, In, 0, 1, true);
    p.lmi_add_term(lmi, X, In, In, 1, 1, false);
    return lmi;
}

}  // namespace

int add_constraint_lmi(SdpProblem& p, const ChanceConstraint& con, double factor, VarId X,
                       VarId Y, int state_dim, int input_dim) {
    return add_con_lmi_impl(p, con, &factor, nullptr, 0.0, X, Y, state_dim, input_dim);
}

int add_constraint_lmi_var(SdpProblem& p, const ChanceConstraint& con, VarId t, double tcoeff,
                           VarId X, VarId Y, int state_dim, int input_dim) {
    return add_con_lmi_impl(p, con, nullptr, &t, tcoeff, X, Y, state_dim, input_dim);
}

double constraint_margin(const ChanceConstraint& con, double factor, const Matrix& X,
                         const Matrix& K, double* scale) {
    const auto set_scale = [&](double s) {
        if (scale) *scale = s;
    };
    if (con.form == ConstraintForm::Scc) {
        const double rhs = factor * con.bound * con.bound;
        const Matrix cov = con.target == ConstraintTarget::State
                               ? X
                               : Matrix(K * X * K.transpose());
        const double var = con.direction.dot(cov * con.direction);
        set_scale(std::max({1e-300, std::abs(rhs), std::abs(var)}));
        return rhs - var;
    }
    const Matrix Sh = regularize_jcc_shape(con.shape);
    const Matrix cov =
        con.target == ConstraintTarget::State ? X : Matrix(K * X * K.transpose());
    const Matrix M = factor * con.bound * Sh - cov;
    set_scale(std::max(1e-300, (factor * con.bound * Sh).norm() + cov.norm()));
    return min_eig(M);
}

namespace {

SynthesisResult synth_impl(const SystemModel& model0, const CostSpec& cost0,
                           const std::vector<ChanceConstraint>& cons0) {
    model0.validate();
    const int n = model0.n(), m = model0.m();
    cost0.validate(n, m);
    std::vector<double> factors;
    for (const auto& con : cons0) {
        con.validate(n, m);
        factors.push_back(constraint_factor(con, n, m));
    }

    const Frame fr = make_frame(model0, nullptr, cons0);
    const SystemModel model = scale_model(model0, fr);
    const CostSpec cost = scale_cost(cost0, fr);

    Base base = make_base(model);
    SdpProblem& p = base.p;
    VarId P = p.add_symmetric(m, "P");
    p.objective_add(base.X, cost.Q);
    p.objective_add(P, Matrix::Identity(m, m));

    // [ P, R^{1/2} Y; Y' R^{1/2}, X ] >= 0 makes Tr(P) an exact stand-in
    // for the input cost Tr(Y X^{-1} Y' R) at the optimum.
    const Matrix Rhalf = sqrt_psd(cost.R);
    const Matrix In = Matrix::Identity(n, n), Im = Matrix::Identity(m, m);
    const int cost_lmi = p.add_lmi({m, n});
    p.lmi_add_term(cost_lmi, P, Im, Im, 0, 0, false);
    p.lmi_add_term(cost_lmi, base.Y, Rhalf, In, 0, 1, true);
    p.lmi_add_term(cost_lmi, base.X, In, In, 1, 1, false);

    for (size_t i = 0; i < cons0.size(); ++i)
        add_constraint_lmi(p, scale_constraint(cons0[i], fr), factors[i], base.X, base.Y, n, m);

    const SdpSolution sol = solve_staged(p);
    if (sol.status == SdpStatus::Infeasible) {
        // Identify constraints that are infeasible even alone.
        std::vector<int> alone;
        for (size_t i = 0; i < cons0.size(); ++i) {
            Base probe = make_base(model);
            probe.p.objective_add(probe.X, Matrix::Identity(n, n));
            add_constraint_lmi(probe.p, scale_constraint(cons0[i], fr), factors[i], probe.X,
                               probe.Y, n, m);
            if (solve_staged(probe.p).status == SdpStatus::Infeasible) alone.push_back(int(i));
        }
        std::ostringstream os;
        os << "constrained synthesis is infeasible at the requested levels";
        if (!alone.empty()) {
            os << "; constraints infeasible in isolation:";
            for (int i : alone) os << ' ' << i;
        } else if (!cons0.empty()) {
            os << "; the constraints are jointly infeasible (none alone)";
        }
        throw Infeasible(os.str());
    }
    if (sol.status != SdpStatus::Optimal) throw_solver_failure(sol, "synthesize");

    const Matrix Ks = recover_gain(sol.value(base.X), sol.value(base.Y));
    SynthesisResult out;
    out.K = fr.trivial ? Ks : Matrix(Ks * fr.T);
    out.Xbar = solve_discrete_lyapunov(Matrix(model0.A + model0.B * out.K), model0.W);
    out.Y = out.K * out.Xbar;
    out.cost = (cost0.Q * out.Xbar).trace() +
               (out.K.transpose() * cost0.R * out.K * out.Xbar).trace();
    out.stats = sol;
    for (size_t i = 0; i < cons0.size(); ++i) {
        double scale = 1.0;
        const double margin = constraint_margin(cons0[i], factors[i], out.Xbar, out.K, &scale);
        if (margin <= 1e-6 * scale) out.active_constraints.push_back(int(i));
    }
    return out;
}

}  // namespace

SynthesisResult synthesize_unconstrained(const SystemModel& model, const CostSpec& cost) {
    return synth_impl(model, cost, {});
}

SynthesisResult synthesize_constrained(const SystemModel& model, const CostSpec& cost,
                                       const std::vector<ChanceConstraint>& constraints) {
    return synth_impl(model, cost, constraints);
}

MinLevelResult min_violation_level(const SystemModel& model0, const ChanceConstraint& con0,
                                   const std::vector<ChanceConstraint>& fixed0) {
    model0.validate();
    const int n = model0.n(), m = model0.m();
    con0.validate(n, m);
    std::vector<double> fixed_factors;
    for (const auto& con : fixed0) {
        con.validate(n, m);
        fixed_factors.push_back(constraint_factor(con, n, m));
    }

    const Frame fr = make_frame(model0, &con0, fixed0);
    const SystemModel model = scale_model(model0, fr);

    const FactorKind kind = con0.form == ConstraintForm::Jcc
                                ? FactorKind::Jcc
                                : (con0.side == Sidedness::OneSided ? FactorKind::SccOneSided
                                                                    : FactorKind::SccTwoSided);
    const int dim = con0.target == ConstraintTarget::State ? n : m;
    const bool wss = con0.cls == DisturbanceClass::WSS;
    double tcoeff = 1.0;
    if (wss) {
        // Bounded-variance factors are linear in eps, so eps itself is the
        // SDP variable: alpha = 2 eps (one-sided), eps (two-sided), eps/dim
        // (joint).
        tcoeff = kind == FactorKind::SccOneSided ? 2.0
                 : kind == FactorKind::SccTwoSided ? 1.0
                                                   : 1.0 / double(dim);
    }

    Base base = make_base(model);
    SdpProblem& p = base.p;
    VarId t = p.add_scalar("level");
    p.objective_add(t, 1.0);
    add_constraint_lmi_var(p, scale_constraint(con0, fr), t, tcoeff, base.X, base.Y, n, m);
    for (size_t i = 0; i < fixed0.size(); ++i)
        add_constraint_lmi(p, scale_constraint(fixed0[i], fr), fixed_factors[i], base.X, base.Y,
                           n, m);

    const SdpSolution sol = solve_staged(p);
    if (sol.status == SdpStatus::Infeasible)
        throw Infeasible("no admissible violation level: the fixed constraints already exclude "
                         "every stabilizing gain");
    if (sol.status != SdpStatus::Optimal) throw_solver_failure(sol, "min_violation_level");

    const double tstar = std::max(0.0, sol.scalar(t));
    const Matrix Ks = recover_gain(sol.value(base.X), sol.value(base.Y));

    MinLevelResult out;
    out.stats = sol;
    out.K_witness = fr.trivial ? Ks : Matrix(Ks * fr.T);
    if (wss) {
        out.factor = tcoeff * tstar;
        out.below_floor = tstar <= tol::level_floor;
        if (kind == FactorKind::SccOneSided && tstar >= 0.5)
            throw Infeasible("one-sided levels live below 1/2 and the minimum exceeds it");
        out.eps_min = std::clamp(tstar, tol::level_floor, 1.0 - tol::level_floor);
    } else {
        const double factor_at_floor =
            con0.form == ConstraintForm::Scc
                ? scc_factor(con0.cls, con0.side, tol::level_floor)
                : jcc_factor(con0.cls, dim, tol::level_floor);
        out.factor = tstar;
        out.below_floor = tstar <= factor_at_floor;
        out.eps_min = level_from_factor(con0.cls, kind, dim, std::max(tstar, factor_at_floor));
    }
    return out;
}

double closed_loop_cost(const SystemModel& model, const CostSpec& cost, const Matrix& K,
                        Matrix* Xbar_out) {
    model.validate();
    cost.validate(model.n(), model.m());
    if (K.rows() != model.m() || K.cols() != model.n())
        throw DimensionMismatch("closed_loop_cost: K must be m x n");
    const Matrix Xbar = solve_discrete_lyapunov(Matrix(model.A + model.B * K), model.W);
    if (Xbar_out) *Xbar_out = Xbar;
    return (cost.Q * Xbar).trace() + (K.transpose() * cost.R * K * Xbar).trace();
}

}  // namespace cclqr
