#include "cclqr/sdp.hpp"
#include <cstdio>
#include <cstdlib>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace cclqr {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2 = 0.7071067811865475;

int svec_dim(int d) { return d * (d + 1) / 2; }

// Column-major lower-triangle svec with sqrt(2) off-diagonal scaling, so
// that svec(U).dot(svec(V)) = Tr(U V).
Vector svec(const Matrix& M) {
    const int d = int(M.rows());
    Vector v(svec_dim(d));
    int k = 0;
    for (int c = 0; c < d; ++c) {
        v[k++] = M(c, c);
        for (int r = c + 1; r < d; ++r) v[k++] = kSqrt2 * 0.5 * (M(r, c) + M(c, r));
    }
    return v;
}

Matrix smat(const Vector& v, int d) {
    Matrix M(d, d);
    int k = 0;
    for (int c = 0; c < d; ++c) {
        M(c, c) = v[k++];
        for (int r = c + 1; r < d; ++r) {
            const double x = kInvSqrt2 * v[k++];
            M(r, c) = x;
            M(c, r) = x;
        }
    }
    return M;
}

}  // namespace

std::string to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::Optimal: return "Optimal";
        case SdpStatus::Infeasible: return "Infeasible";
        case SdpStatus::Unbounded: return "Unbounded";
        case SdpStatus::MaxIterations: return "MaxIterations";
        case SdpStatus::NumericalFailure: return "NumericalFailure";
    }
    return "NumericalFailure";
}

const Matrix& SdpSolution::value(VarId v) const {
    auto it = values.find(v.idx);
    if (it == values.end()) throw MalformedProblem("SdpSolution::value: unknown variable");
    return it->second;
}

double SdpSolution::scalar(VarId v) const {
    const Matrix& M = value(v);
    if (M.rows() != 1 || M.cols() != 1)
        throw MalformedProblem("SdpSolution::scalar: variable is not scalar");
    return M(0, 0);
}

// ---------------------------------------------------------------------------
// Modeling layer
// ---------------------------------------------------------------------------

VarId SdpProblem::add_symmetric(int order, std::string label) {
    if (order < 1) throw MalformedProblem("add_symmetric: order must be >= 1");
    Variable v{VarKind::Symmetric, order, order, std::move(label), total_coords_, svec_dim(order)};
    total_coords_ += v.coord_count;
    vars_.push_back(std::move(v));
    return VarId{int(vars_.size()) - 1};
}

VarId SdpProblem::add_rect(int rows, int cols, std::string label) {
    if (rows < 1 || cols < 1) throw MalformedProblem("add_rect: shape must be positive");
    Variable v{VarKind::Rect, rows, cols, std::move(label), total_coords_, rows * cols};
    total_coords_ += v.coord_count;
    vars_.push_back(std::move(v));
    return VarId{int(vars_.size()) - 1};
}

VarId SdpProblem::add_scalar(std::string label) {
    Variable v{VarKind::Scalar, 1, 1, std::move(label), total_coords_, 1};
    total_coords_ += 1;
    vars_.push_back(std::move(v));
    return VarId{int(vars_.size()) - 1};
}

const SdpProblem::Variable& SdpProblem::var_checked(VarId v, const char* who) const {
    if (!v.valid() || v.idx >= int(vars_.size())) {
        std::ostringstream os;
        os << who << ": invalid variable id";
        throw MalformedProblem(os.str());
    }
    return vars_[v.idx];
}

void SdpProblem::objective_add(VarId v, const Matrix& C) {
    const Variable& var = var_checked(v, "objective_add");
    if (C.rows() != var.rows || C.cols() != var.cols)
        throw MalformedProblem("objective_add: coefficient shape does not match variable");
    objective_.emplace_back(v, C);
}

void SdpProblem::objective_add(VarId v, double coeff) {
    const Variable& var = var_checked(v, "objective_add");
    if (var.coord_count != 1)
        throw MalformedProblem("objective_add: scalar coefficient needs a scalar variable");
    Matrix C(1, 1);
    C(0, 0) = coeff;
    objective_.emplace_back(v, C);
}

int SdpProblem::add_lmi(const std::vector<int>& block_sizes) {
    if (block_sizes.empty()) throw MalformedProblem("add_lmi: need at least one block");
    Lmi lmi;
    lmi.block_offsets.assign(1, 0);
    for (int s : block_sizes) {
        if (s < 1) throw MalformedProblem("add_lmi: block sizes must be positive");
        lmi.block_offsets.push_back(lmi.block_offsets.back() + s);
    }
    lmi.order = lmi.block_offsets.back();
    lmi.constant = Matrix::Zero(lmi.order, lmi.order);
    lmis_.push_back(std::move(lmi));
    return int(lmis_.size()) - 1;
}

void SdpProblem::check_block(const Lmi& lmi, const Matrix& M, int row, int col,
                             const char* who) const {
    const int nb = int(lmi.block_offsets.size()) - 1;
    if (row < 0 || col < 0 || row >= nb || col >= nb) {
        std::ostringstream os;
        os << who << ": block (" << row << "," << col << ") out of range";
        throw MalformedProblem(os.str());
    }
    const int brows = lmi.block_offsets[row + 1] - lmi.block_offsets[row];
    const int bcols = lmi.block_offsets[col + 1] - lmi.block_offsets[col];
    if (M.rows() != brows || M.cols() != bcols) {
        std::ostringstream os;
        os << who << ": a " << M.rows() << "x" << M.cols() << " contribution does not fit the "
           << brows << "x" << bcols << " block (" << row << "," << col << ")";
        throw MalformedProblem(os.str());
    }
}

void SdpProblem::lmi_add_constant(int lmi_idx, const Matrix& M, int row, int col, bool hermitize) {
    if (lmi_idx < 0 || lmi_idx >= int(lmis_.size()))
        throw MalformedProblem("lmi_add_constant: bad LMI index");
    Lmi& lmi = lmis_[lmi_idx];
    check_block(lmi, M, row, col, "lmi_add_constant");
    const int r0 = lmi.block_offsets[row], c0 = lmi.block_offsets[col];
    lmi.constant.block(r0, c0, M.rows(), M.cols()) += M;
    if (hermitize || row != col) {
        lmi.constant.block(c0, r0, M.cols(), M.rows()) += M.transpose();
    } else if (!is_symmetric(M, 1e-9)) {
        throw MalformedProblem("lmi_add_constant: diagonal-block constant must be symmetric");
    }
}

void SdpProblem::lmi_add_term(int lmi_idx, VarId v, const Matrix& L, const Matrix& R, int row,
                              int col, bool hermitize) {
    if (lmi_idx < 0 || lmi_idx >= int(lmis_.size()))
        throw MalformedProblem("lmi_add_term: bad LMI index");
    Lmi& lmi = lmis_[lmi_idx];
    const Variable& var = var_checked(v, "lmi_add_term");
    if (L.cols() != var.rows || R.rows() != var.cols)
        throw MalformedProblem("lmi_add_term: L/R shapes do not match the variable");
    Matrix probe = Matrix::Zero(L.rows(), R.cols());
    check_block(lmi, probe, row, col, "lmi_add_term");
    if (row != col && !hermitize)
        throw MalformedProblem("lmi_add_term: off-diagonal placements must hermitize");
    lmi.terms.push_back(Term{v, L, R, row, col, hermitize});
}

void SdpProblem::add_equality(const std::vector<std::pair<VarId, Matrix>>& coeffs, double rhs) {
    for (const auto& [v, C] : coeffs) {
        const Variable& var = var_checked(v, "add_equality");
        if (C.rows() != var.rows || C.cols() != var.cols)
            throw MalformedProblem("add_equality: coefficient shape does not match variable");
    }
    equalities_.push_back(Equality{coeffs, rhs});
}

// ---------------------------------------------------------------------------
// Flattening to conic standard form
//
//   minimize c'u   s.t.  A u = b,   G u + s = h,   s in product of PSD cones
//
// where u stacks svec coordinates of symmetric variables, vec coordinates
// of rectangular variables and raw scalars, and each LMI is one PSD cone
// (svec'd).
// ---------------------------------------------------------------------------

struct SdpBackend {
    using Problem = SdpProblem;

    const Problem& p;
    int q = 0;                       // number of flat coordinates
    std::vector<int> cone_order;     // PSD block orders
    std::vector<int> cone_off;       // offsets into the stacked svec vectors
    int S = 0;                       // total svec length
    Vector c, b, h;
    Matrix G, A;

    explicit SdpBackend(const Problem& prob) : p(prob) { build(); }

    // Basis matrix of local coordinate j of a variable.
    static Matrix basis(const Problem::Variable& var, int j) {
        if (var.kind == Problem::VarKind::Symmetric) {
            Matrix E = Matrix::Zero(var.rows, var.cols);
            int k = 0;
            for (int cc = 0; cc < var.cols; ++cc) {
                if (k == j) {
                    E(cc, cc) = 1.0;
                    return E;
                }
                ++k;
                for (int rr = cc + 1; rr < var.rows; ++rr) {
                    if (k == j) {
                        E(rr, cc) = kInvSqrt2;
                        E(cc, rr) = kInvSqrt2;
                        return E;
                    }
                    ++k;
                }
            }
            throw MalformedProblem("basis: coordinate out of range");
        }
        Matrix E = Matrix::Zero(var.rows, var.cols);
        E(j % var.rows, j / var.rows) = 1.0;  // column-major
        return E;
    }

    static Matrix value_from_coords(const Problem::Variable& var,
                                    const Eigen::Ref<const Vector>& u) {
        Matrix V = Matrix::Zero(var.rows, var.cols);
        for (int j = 0; j < var.coord_count; ++j) V += u[j] * basis(var, j);
        return V;
    }

    static Vector coords_from_value(const Problem::Variable& var, const Matrix& V) {
        Vector u(var.coord_count);
        for (int j = 0; j < var.coord_count; ++j) {
            const Matrix E = basis(var, j);
            u[j] = (E.array() * V.array()).sum();
        }
        return u;
    }

    void build() {
        if (p.vars_.empty()) throw MalformedProblem("solve: problem has no variables");
        q = p.total_coords_;

        c = Vector::Zero(q);
        for (const auto& [v, C] : p.objective_) {
            const auto& var = p.vars_[v.idx];
            c.segment(var.coord_offset, var.coord_count) += coords_from_value(var, C);
        }

        for (const auto& lmi : p.lmis_) {
            cone_order.push_back(lmi.order);
            cone_off.push_back(S);
            S += svec_dim(lmi.order);
        }
        h = Vector::Zero(S);
        G = Matrix::Zero(S, q);
        for (size_t l = 0; l < p.lmis_.size(); ++l) {
            const auto& lmi = p.lmis_[l];
            h.segment(cone_off[l], svec_dim(lmi.order)) = svec(lmi.constant);
            for (const auto& t : lmi.terms) {
                const auto& var = p.vars_[t.var.idx];
                const int r0 = lmi.block_offsets[t.row], c0 = lmi.block_offsets[t.col];
                for (int j = 0; j < var.coord_count; ++j) {
                    Matrix F = Matrix::Zero(lmi.order, lmi.order);
                    const Matrix P = t.L * basis(var, j) * t.R;
                    F.block(r0, c0, P.rows(), P.cols()) += P;
                    if (t.hermitize || t.row != t.col)
                        F.block(c0, r0, P.cols(), P.rows()) += P.transpose();
                    else
                        F = 0.5 * (F + F.transpose());
                    G.col(var.coord_offset + j).segment(cone_off[l], svec_dim(lmi.order)) -=
                        svec(F);
                }
            }
        }

        const int peq = int(p.equalities_.size());
        A = Matrix::Zero(peq, q);
        b = Vector::Zero(peq);
        for (int i = 0; i < peq; ++i) {
            const auto& eq = p.equalities_[i];
            b[i] = eq.rhs;
            for (const auto& [v, C] : eq.coeffs) {
                const auto& var = p.vars_[v.idx];
                A.row(i).segment(var.coord_offset, var.coord_count) +=
                    coords_from_value(var, C).transpose();
            }
        }
    }

    // --- per-cone helpers on stacked svec vectors ---

    Matrix block(const Vector& v, size_t l) const {
        return smat(v.segment(cone_off[l], svec_dim(cone_order[l])), cone_order[l]);
    }
    void set_block(Vector& v, size_t l, const Matrix& M) const {
        v.segment(cone_off[l], svec_dim(cone_order[l])) = svec(M);
    }

    double min_eig(const Vector& v) const {
        double m = std::numeric_limits<double>::infinity();
        for (size_t l = 0; l < cone_order.size(); ++l) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(block(v, l), Eigen::EigenvaluesOnly);
            m = std::min(m, es.eigenvalues().minCoeff());
        }
        return m;
    }

    // Shift v so that every cone block is comfortably interior.
    void force_interior(Vector& v) const {
        for (size_t l = 0; l < cone_order.size(); ++l) {
            Matrix M = block(v, l);
            Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
            const double lam = es.eigenvalues().minCoeff();
            const double scale = std::max(1.0, M.norm());
            if (lam < 1e-8 * scale) {
                M += (1e-8 * scale - lam + 1.0) * Matrix::Identity(M.rows(), M.cols());
                set_block(v, l, M);
            }
        }
    }
};

namespace {

struct NtScaling {
    // Per cone: factors with W(u) = r' u r, W^{-T}(u) = rti' u rti,
    // T = r r', Tinv = rti rti', lambda = scaled point (diagonal).
    std::vector<Matrix> r, rti, T, Tinv;
    std::vector<Vector> lam;  // eigenvalues (diagonal of the scaled point)
    bool ok = false;
};

Matrix psd_factor(const Matrix& M) {
    // Any F with F F' = M works for the scaling construction.
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    Vector lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i)
        if (lam[i] < 1e-300) lam[i] = 1e-300;
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

NtScaling compute_scaling(const SdpBackend& bk, const Vector& s, const Vector& z) {
    NtScaling W;
    const size_t L = bk.cone_order.size();
    W.r.resize(L);
    W.rti.resize(L);
    W.T.resize(L);
    W.Tinv.resize(L);
    W.lam.resize(L);
    for (size_t l = 0; l < L; ++l) {
        const Matrix Ls = psd_factor(bk.block(s, l));
        const Matrix Lz = psd_factor(bk.block(z, l));
        Eigen::JacobiSVD<Matrix> svd(Lz.transpose() * Ls,
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
        Vector sing = svd.singularValues();
        if (sing.minCoeff() <= 0.0 || !sing.allFinite()) return W;  // ok = false
        const Vector isqrt = sing.cwiseSqrt().cwiseInverse();
        W.r[l] = Ls * svd.matrixV() * isqrt.asDiagonal();
        W.rti[l] = Lz * svd.matrixU() * isqrt.asDiagonal();
        W.T[l] = W.r[l] * W.r[l].transpose();
        W.Tinv[l] = W.rti[l] * W.rti[l].transpose();
        W.lam[l] = sing;
    }
    W.ok = true;
    return W;
}

enum class ScaleOp { W, WT, WinvT, TinvCongr, TCongr };

// Applies one of the scaling congruences blockwise to a stacked svec vector.
Vector apply(const SdpBackend& bk, const NtScaling& W, ScaleOp op, const Vector& v) {
    Vector out(v.size());
    for (size_t l = 0; l < bk.cone_order.size(); ++l) {
        const Matrix M = bk.block(v, l);
        Matrix R;
        switch (op) {
            case ScaleOp::W: R = W.r[l].transpose() * M * W.r[l]; break;
            case ScaleOp::WT: R = W.r[l] * M * W.r[l].transpose(); break;
            case ScaleOp::WinvT: R = W.rti[l].transpose() * M * W.rti[l]; break;
            case ScaleOp::TinvCongr: R = W.Tinv[l] * M * W.Tinv[l]; break;
            case ScaleOp::TCongr: R = W.T[l] * M * W.T[l]; break;
        }
        out.segment(bk.cone_off[l], svec_dim(bk.cone_order[l])) = svec(0.5 * (R + R.transpose()));
    }
    return out;
}

// Jordan product u o v = (UV + VU)/2 on stacked svec vectors.
Vector jordan(const SdpBackend& bk, const Vector& u, const Vector& v) {
    Vector out(u.size());
    for (size_t l = 0; l < bk.cone_order.size(); ++l) {
        const Matrix U = bk.block(u, l), V = bk.block(v, l);
        out.segment(bk.cone_off[l], svec_dim(bk.cone_order[l])) = svec(0.5 * (U * V + V * U));
    }
    return out;
}

// Solves lambda o x = v for diagonal lambda: x_ij = 2 v_ij / (l_i + l_j).
Vector jordan_div_lambda(const SdpBackend& bk, const NtScaling& W, const Vector& v) {
    Vector out(v.size());
    for (size_t l = 0; l < bk.cone_order.size(); ++l) {
        Matrix M = bk.block(v, l);
        const Vector& lam = W.lam[l];
        for (int i = 0; i < M.rows(); ++i)
            for (int j = 0; j < M.cols(); ++j) M(i, j) = 2.0 * M(i, j) / (lam[i] + lam[j]);
        out.segment(bk.cone_off[l], svec_dim(bk.cone_order[l])) = svec(M);
    }
    return out;
}

Vector identity_svec(const SdpBackend& bk) {
    Vector e = Vector::Zero(bk.S);
    for (size_t l = 0; l < bk.cone_order.size(); ++l)
        bk.set_block(e, l, Matrix::Identity(bk.cone_order[l], bk.cone_order[l]));
    return e;
}

// Largest step a with lam + a * mat(dir_scaled) still PSD (per cone), plus
// the tau/kappa ratio tests; returns the max allowed a (may be +inf).
double max_step(const SdpBackend& bk, const NtScaling& W, const Vector& dir_scaled) {
    double amax = std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < bk.cone_order.size(); ++l) {
        const Vector isl = W.lam[l].cwiseSqrt().cwiseInverse();
        const Matrix Mn = isl.asDiagonal() * bk.block(dir_scaled, l) * isl.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Mn + Mn.transpose()),
                                                 Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues().minCoeff();
        if (lmin < 0.0) amax = std::min(amax, -1.0 / lmin);
    }
    return amax;
}

struct KktSolver {
    using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

    const SdpBackend& bk;
    const NtScaling& W;
    int refine_steps;
    Eigen::PartialPivLU<MatrixL> lu;
    bool ok = false;

    KktSolver(const SdpBackend& bk_, const NtScaling& W_, int refine)
        : bk(bk_), W(W_), refine_steps(refine) {
        const int q = bk.q, peq = int(bk.b.size());
        // Gs = W^{-T} G columnwise; H = Gs' Gs.  Forming H squares the
        // scaling's condition number, which outruns double precision near
        // the end of the path, so the reduced system is built and factored
        // in extended precision.
        Matrix Gs(bk.S, q);
        for (int j = 0; j < q; ++j) Gs.col(j) = apply(bk, W, ScaleOp::WinvT, bk.G.col(j));
        const MatrixL GsL = Gs.cast<long double>();
        const MatrixL H = GsL.transpose() * GsL;
        MatrixL Mreg = MatrixL::Zero(q + peq, q + peq);
        Mreg.topLeftCorner(q, q) = H;
        if (peq > 0) {
            Mreg.topRightCorner(q, peq) = bk.A.transpose().cast<long double>();
            Mreg.bottomLeftCorner(peq, q) = bk.A.cast<long double>();
        }
        const long double delta =
            1e-16L * std::max<long double>(1.0L, H.diagonal().cwiseAbs().maxCoeff());
        Mreg.topLeftCorner(q, q) += delta * MatrixL::Identity(q, q);
        Mreg.bottomRightCorner(peq, peq) -= delta * MatrixL::Identity(peq, peq);
        lu.compute(Mreg);
        VectorL probe = lu.solve(VectorL::Ones(q + peq));
        ok = probe.allFinite();
    }

    // One elimination pass through the factored reduced system.
    void raw_solve(const Vector& bx, const Vector& by, const Vector& bz, Vector& x, Vector& y,
                   Vector& z) const {
        const int q = bk.q, peq = int(bk.b.size());
        const Vector bz2 = apply(bk, W, ScaleOp::TinvCongr, bz);
        VectorL rhs(q + peq);
        rhs.head(q) = (bx + bk.G.transpose() * bz2).cast<long double>();
        if (peq > 0) rhs.tail(peq) = by.cast<long double>();
        const VectorL sol = lu.solve(rhs);
        x = sol.head(q).cast<double>();
        y = peq > 0 ? Vector(sol.tail(peq).cast<double>()) : Vector(0);
        z = apply(bk, W, ScaleOp::TinvCongr, Vector(bk.G * x - bz));
    }

    // Solves [0 A' G'; A 0 0; G 0 -W'W] (x,y,z) = (bx,by,bz).  The reduced
    // factorization squares the scaling's conditioning, so accuracy is
    // restored by iterative refinement with residuals evaluated in the
    // full (unreduced) system via exact operator applications.
    bool solve(const Vector& bx, const Vector& by, const Vector& bz, Vector& x, Vector& y,
               Vector& z) const {
        const int peq = int(bk.b.size());
        raw_solve(bx, by, bz, x, y, z);
        if (!x.allFinite() || !z.allFinite()) return false;

        const double bscale = std::max({1.0, bx.norm(), by.norm(), bz.norm()});
        double prev = std::numeric_limits<double>::infinity();
        for (int it = 0; it < refine_steps + 2; ++it) {
            const Vector r1 = bx - (peq > 0 ? Vector(bk.A.transpose() * y) : Vector::Zero(bk.q)) -
                              bk.G.transpose() * z;
            const Vector r2 = peq > 0 ? Vector(by - bk.A * x) : Vector(0);
            const Vector r3 = bz - bk.G * x + apply(bk, W, ScaleOp::TCongr, z);
            const double rn = std::max({r1.norm(), peq > 0 ? r2.norm() : 0.0, r3.norm()});
            if (rn <= 1e-14 * bscale || rn >= 0.5 * prev) break;
            prev = rn;
            Vector cx, cy, cz;
            raw_solve(r1, r2, r3, cx, cy, cz);
            if (!cx.allFinite() || !cz.allFinite()) break;
            x += cx;
            if (peq > 0) y += cy;
            z += cz;
        }
        return x.allFinite() && z.allFinite();
    }
};

// Full homogeneous Newton system with tau kept as an explicit unknown,
// factored in extended precision.  Eliminating tau by superposition of two
// reduced solves is cheaper, but its denominator is a difference of inner
// products that cancels catastrophically near convergence; at the problem
// sizes handled here a direct factorization costs nothing and is exact to
// pivoting.
struct HsdeKkt {
    using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

    const SdpBackend& bk;
    Eigen::PartialPivLU<MatrixL> lu;
    bool ok = false;

    HsdeKkt(const SdpBackend& bk_, const NtScaling& W, double tau, double kappa) : bk(bk_) {
        const int q = bk.q, peq = int(bk.b.size()), S = bk.S;
        const int N = q + peq + S + 1;
        MatrixL M = MatrixL::Zero(N, N);
        const MatrixL GL = bk.G.cast<long double>();
        const MatrixL AL = bk.A.cast<long double>();
        const VectorL cL = bk.c.cast<long double>();
        const VectorL bL = bk.b.cast<long double>();
        const VectorL hL = bk.h.cast<long double>();

        // [ 0    A'   G'   c ] [dx  ]
        // [ A    0    0   -b ] [dy  ]
        // [ G    0  -W'W  -h ] [dz  ]
        // [ c'   b'   h' -k/t] [dtau]
        if (peq > 0) {
            M.block(0, q, q, peq) = AL.transpose();
            M.block(q, 0, peq, q) = AL;
            M.block(q, q + peq + S, peq, 1) = -bL;
            M.block(q + peq + S, q, 1, peq) = bL.transpose();
        }
        M.block(0, q + peq, q, S) = GL.transpose();
        M.block(q + peq, 0, S, q) = GL;
        M.block(0, q + peq + S, q, 1) = cL;
        M.block(q + peq + S, 0, 1, q) = cL.transpose();
        M.block(q + peq, q + peq + S, S, 1) = -hL;
        M.block(q + peq + S, q + peq, 1, S) = hL.transpose();
        M(N - 1, N - 1) = -static_cast<long double>(kappa / tau);
        Vector ej = Vector::Zero(S);
        for (int j = 0; j < S; ++j) {
            ej[j] = 1.0;
            M.block(q + peq, q + peq + j, S, 1) -=
                apply(bk, W, ScaleOp::TCongr, ej).cast<long double>();
            ej[j] = 0.0;
        }
        lu.compute(M);
        const VectorL probe = lu.solve(VectorL::Ones(N));
        ok = probe.allFinite();
    }

    bool solve(const Vector& rhx, const Vector& rhy, const Vector& bz_tilde, double rhs_tau,
               Vector& dx, Vector& dy, Vector& dz, double& dtau) const {
        const int q = bk.q, peq = int(bk.b.size()), S = bk.S;
        VectorL rhs(q + peq + S + 1);
        rhs.head(q) = rhx.cast<long double>();
        if (peq > 0) rhs.segment(q, peq) = rhy.cast<long double>();
        rhs.segment(q + peq, S) = bz_tilde.cast<long double>();
        rhs[q + peq + S] = static_cast<long double>(rhs_tau);
        const VectorL sol = lu.solve(rhs);
        dx = sol.head(q).cast<double>();
        dy = peq > 0 ? Vector(sol.segment(q, peq).cast<double>()) : Vector(0);
        dz = sol.segment(q + peq, S).cast<double>();
        dtau = static_cast<double>(sol[q + peq + S]);
        return dx.allFinite() && dz.allFinite() && std::isfinite(dtau);
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// Interior-point driver (homogeneous self-dual embedding)
// ---------------------------------------------------------------------------

SdpSolution SdpProblem::solve(const SdpSettings& settings) const {
    SdpBackend bk(*this);
    SdpSolution out;

    const int q = bk.q, peq = int(bk.b.size());
    const double resx0 = std::max(1.0, bk.c.norm());
    const double resy0 = std::max(1.0, bk.b.norm());
    const double resz0 = std::max(1.0, bk.h.norm());
    double nu = 0.0;
    for (int d : bk.cone_order) nu += d;

    auto fill_values = [&](const Vector& x, double tau) {
        out.values.clear();
        for (size_t i = 0; i < vars_.size(); ++i) {
            const auto& var = vars_[i];
            out.values[int(i)] = SdpBackend::value_from_coords(
                var, Vector(x.segment(var.coord_offset, var.coord_count) / tau));
        }
    };

    // --- initial point: least-squares-ish solves with identity scaling ---
    Vector x(q), y(peq), z(bk.S), s(bk.S);
    {
        // Identity scaling: synthesize from unit s/z blocks.
        Vector es = identity_svec(bk);
        NtScaling Wid = compute_scaling(bk, es, es);
        KktSolver kkt(bk, Wid, settings.refine_steps);
        if (!kkt.ok) {
            out.status = SdpStatus::NumericalFailure;
            return out;
        }
        Vector xi, yi, zi;
        if (!kkt.solve(Vector::Zero(q), bk.b, bk.h, xi, yi, zi)) {
            out.status = SdpStatus::NumericalFailure;
            return out;
        }
        x = xi;
        y = peq > 0 ? yi : Vector(0);
        s = bk.h - bk.G * x;
        bk.force_interior(s);

        Vector xd, yd, zd;
        if (!kkt.solve(-bk.c, Vector::Zero(peq), Vector::Zero(bk.S), xd, yd, zd)) {
            out.status = SdpStatus::NumericalFailure;
            return out;
        }
        if (peq > 0) y = yd;
        z = zd;
        bk.force_interior(z);
    }
    double tau = 1.0, kappa = 1.0;

    const Vector e = identity_svec(bk);

    // Track the most-converged iterate so a late numerical stall can still
    // return a certified solution instead of failing outright.
    Vector best_x;
    double best_tau = 1.0, best_pres = 0.0, best_dres = 0.0, best_gaprel = 0.0;
    double best_merit = std::numeric_limits<double>::infinity();
    auto best_certifies = [&]() {
        return best_x.size() > 0 && best_pres <= settings.feas_tol &&
               best_dres <= settings.feas_tol && best_gaprel <= settings.gap_tol;
    };
    auto finish_from_best = [&]() {
        fill_values(best_x, best_tau);
        out.status = SdpStatus::Optimal;
        out.objective_value = bk.c.dot(best_x) / best_tau;
        return out;
    };

    for (int iter = 0; iter <= settings.max_iter; ++iter) {
        // Residuals of the self-dual system.
        Vector rx = bk.A.rows() > 0 ? Vector(bk.A.transpose() * y + bk.G.transpose() * z +
                                             bk.c * tau)
                                    : Vector(bk.G.transpose() * z + bk.c * tau);
        Vector ry = peq > 0 ? Vector(bk.A * x - bk.b * tau) : Vector(0);
        Vector rz = s + bk.G * x - bk.h * tau;
        const double rtau = kappa + bk.c.dot(x) + (peq > 0 ? bk.b.dot(y) : 0.0) + bk.h.dot(z);

        const double gap = s.dot(z);
        const double mu = (gap + tau * kappa) / (nu + 1.0);
        const double pcost = bk.c.dot(x) / tau;
        const double dcost = -((peq > 0 ? bk.b.dot(y) : 0.0) + bk.h.dot(z)) / tau;

        const double pres = std::max(peq > 0 ? ry.norm() / resy0 : 0.0, rz.norm() / resz0) / tau;
        const double dres = rx.norm() / resx0 / tau;
        const double gap_rel = (gap / (tau * tau)) / std::max(1.0, std::abs(pcost));

        out.iterations = iter;
        out.duality_gap = gap / (tau * tau);

        const double merit = std::max({pres, dres, gap_rel});
        if (merit < best_merit) {
            best_merit = merit;
            best_x = x;
            best_tau = tau;
            best_pres = pres;
            best_dres = dres;
            best_gaprel = gap_rel;
        }

        if (std::getenv("CCLQR_SDP_TRACE")) {
            std::fprintf(stderr,
                         "it=%3d pres=%9.2e dres=%9.2e gaprel=%9.2e pcost=%+.6e tau=%.3e kappa=%.3e\n",
                         iter, pres, dres, gap_rel, pcost, tau, kappa);
        }

        if (pres <= settings.feas_tol && dres <= settings.feas_tol &&
            gap_rel <= settings.gap_tol) {
            fill_values(x, tau);
            out.status = SdpStatus::Optimal;
            out.objective_value = pcost;
            return out;
        }

        // Infeasibility certificates.
        const double hz_by = bk.h.dot(z) + (peq > 0 ? bk.b.dot(y) : 0.0);
        if (hz_by < 0.0) {
            const double pinfres =
                (bk.A.rows() > 0 ? (bk.A.transpose() * y + bk.G.transpose() * z).norm()
                                 : (bk.G.transpose() * z).norm()) /
                resx0 / (-hz_by);
            if (pinfres <= settings.feas_tol) {
                out.status = SdpStatus::Infeasible;
                out.objective_value = std::numeric_limits<double>::quiet_NaN();
                return out;
            }
        }
        const double cx = bk.c.dot(x);
        if (cx < 0.0) {
            const double dinfres =
                std::max(peq > 0 ? (bk.A * x).norm() / resy0 : 0.0,
                         (bk.G * x + s).norm() / resz0) /
                (-cx);
            if (dinfres <= settings.feas_tol) {
                out.status = SdpStatus::Unbounded;
                out.objective_value = -std::numeric_limits<double>::infinity();
                return out;
            }
        }

        if (iter == settings.max_iter) break;

        // Nesterov-Todd scaling at the current iterate.
        NtScaling W = compute_scaling(bk, s, z);
        if (!W.ok) {
            if (best_certifies()) return finish_from_best();
            out.status = SdpStatus::NumericalFailure;
            return out;
        }
        HsdeKkt kkt(bk, W, tau, kappa);
        if (!kkt.ok) {
            if (best_certifies()) return finish_from_best();
            out.status = SdpStatus::NumericalFailure;
            return out;
        }

        Vector lam_sq(bk.S), lam_vec(bk.S);
        for (size_t l = 0; l < bk.cone_order.size(); ++l) {
            bk.set_block(lam_sq, l, Matrix(W.lam[l].cwiseProduct(W.lam[l]).asDiagonal()));
            bk.set_block(lam_vec, l, Matrix(W.lam[l].asDiagonal()));
        }

        auto raw_newton = [&](const Vector& rhx, const Vector& rhy, const Vector& rhz,
                              double rhtau, const Vector& ds_target, double dkappa_target,
                              Vector& dx, Vector& dy, Vector& dz, Vector& ds, double& dtau,
                              double& dkappa) -> bool {
            const Vector bz_tilde = rhz - apply(bk, W, ScaleOp::WT,
                                                jordan_div_lambda(bk, W, ds_target));
            if (!kkt.solve(rhx, rhy, bz_tilde, rhtau - dkappa_target / tau, dx, dy, dz, dtau))
                return false;
            // Recover ds from the primal row rather than the scaling relation:
            // the latter amplifies roundoff by the squared scaling condition
            // number near the boundary, which would stall the primal residual.
            ds = rhz - bk.G * dx + bk.h * dtau;
            dkappa = (dkappa_target - kappa * dtau) / tau;
            return dx.allFinite() && dz.allFinite() && ds.allFinite() && std::isfinite(dtau);
        };

        // raw_newton plus iterative refinement over the complete self-dual
        // Newton system; the tau elimination and complementarity rows suffer
        // cancellation near convergence that only full-system residual
        // correction removes.
        auto newton = [&](const Vector& rhx, const Vector& rhy, const Vector& rhz, double rhtau,
                          const Vector& ds_target, double dkappa_target, Vector& dx, Vector& dy,
                          Vector& dz, Vector& ds, double& dtau, double& dkappa) -> bool {
            if (!raw_newton(rhx, rhy, rhz, rhtau, ds_target, dkappa_target, dx, dy, dz, ds, dtau,
                            dkappa))
                return false;
            const double bscale = std::max({1.0, rhx.norm(), rhz.norm(), ds_target.norm()});
            double prev = std::numeric_limits<double>::infinity();
            for (int rp = 0; rp < settings.refine_steps + 2; ++rp) {
                const Vector r_x =
                    rhx - (peq > 0 ? Vector(bk.A.transpose() * dy) : Vector::Zero(q)) -
                    bk.G.transpose() * dz - bk.c * dtau;
                const Vector r_y = peq > 0 ? Vector(rhy - bk.A * dx + bk.b * dtau) : Vector(0);
                const Vector r_z = rhz - bk.G * dx + bk.h * dtau - ds;
                const double r_t = rhtau - bk.c.dot(dx) - (peq > 0 ? bk.b.dot(dy) : 0.0) -
                                   bk.h.dot(dz) - dkappa;
                const Vector r_s =
                    ds_target - jordan(bk, lam_vec, Vector(apply(bk, W, ScaleOp::W, dz) +
                                                           apply(bk, W, ScaleOp::WinvT, ds)));
                const double r_k = dkappa_target - tau * dkappa - kappa * dtau;
                const double rn = std::max({r_x.norm(), peq > 0 ? r_y.norm() : 0.0, r_z.norm(),
                                            std::abs(r_t), r_s.norm(), std::abs(r_k)});
                if (rn <= 1e-14 * bscale || rn >= 0.5 * prev) break;
                prev = rn;
                Vector cx, cy, cz, cs;
                double ct, ck;
                if (!raw_newton(r_x, r_y, r_z, r_t, r_s, r_k, cx, cy, cz, cs, ct, ck)) break;
                dx += cx;
                if (peq > 0) dy += cy;
                dz += cz;
                ds += cs;
                dtau += ct;
                dkappa += ck;
            }
            return dx.allFinite() && dz.allFinite() && ds.allFinite() && std::isfinite(dtau) &&
                   std::isfinite(dkappa);
        };

        // Predictor (affine) direction.
        Vector dxa, dya, dza, dsa;
        double dtaua, dkappaa;
        if (!newton(-rx, peq > 0 ? Vector(-ry) : Vector(0), -rz, -rtau, Vector(-lam_sq),
                    -tau * kappa, dxa, dya, dza, dsa, dtaua, dkappaa)) {
            if (best_certifies()) return finish_from_best();
            out.status = SdpStatus::NumericalFailure;
            return out;
        }

        const Vector dsa_sc = apply(bk, W, ScaleOp::WinvT, dsa);
        const Vector dza_sc = apply(bk, W, ScaleOp::W, dza);
        double alpha_aff = std::min(max_step(bk, W, dsa_sc), max_step(bk, W, dza_sc));
        if (dtaua < 0.0) alpha_aff = std::min(alpha_aff, -tau / dtaua);
        if (dkappaa < 0.0) alpha_aff = std::min(alpha_aff, -kappa / dkappaa);
        alpha_aff = std::min(1.0, alpha_aff);

        const double gap_aff = (s + alpha_aff * dsa).dot(z + alpha_aff * dza) +
                               (tau + alpha_aff * dtaua) * (kappa + alpha_aff * dkappaa);
        double sigma = std::pow(std::clamp(gap_aff / (gap + tau * kappa), 0.0, 1.0), 3.0);

        // Corrector (combined) direction.
        const Vector ds_target = -lam_sq - jordan(bk, dsa_sc, dza_sc) + sigma * mu * e;
        const double dk_target = -tau * kappa - dtaua * dkappaa + sigma * mu;
        const double rs = 1.0 - sigma;
        Vector dx, dy, dz, ds;
        double dtau, dkappa;
        if (!newton(Vector(-rs * rx), peq > 0 ? Vector(-rs * ry) : Vector(0), Vector(-rs * rz),
                    -rs * rtau, ds_target, dk_target, dx, dy, dz, ds, dtau, dkappa)) {
            if (best_certifies()) return finish_from_best();
            out.status = SdpStatus::NumericalFailure;
            return out;
        }

        const Vector ds_sc = apply(bk, W, ScaleOp::WinvT, ds);
        const Vector dz_sc = apply(bk, W, ScaleOp::W, dz);
        double alpha = std::min(max_step(bk, W, ds_sc), max_step(bk, W, dz_sc));
        if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
        if (dkappa < 0.0) alpha = std::min(alpha, -kappa / dkappa);
        alpha = std::min(1.0, settings.step_frac * alpha);
        if (!(alpha > 1e-13)) {
            if (best_certifies()) return finish_from_best();
            out.status = SdpStatus::NumericalFailure;
            fill_values(x, tau);
            out.objective_value = pcost;
            return out;
        }

        x += alpha * dx;
        if (peq > 0) y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
        tau += alpha * dtau;
        kappa += alpha * dkappa;

        if (!(tau > 1e-300) || !x.allFinite() || !s.allFinite() || !z.allFinite()) {
            if (best_certifies()) return finish_from_best();
            out.status = SdpStatus::NumericalFailure;
            return out;
        }
    }

    if (best_certifies()) return finish_from_best();
    fill_values(x, tau);
    out.status = SdpStatus::MaxIterations;
    out.objective_value = bk.c.dot(x) / tau;
    return out;
}

// ---------------------------------------------------------------------------
// verify / export
// ---------------------------------------------------------------------------

VerifyResult SdpProblem::verify(const std::map<int, Matrix>& values, double tol) const {
    for (size_t i = 0; i < vars_.size(); ++i) {
        auto it = values.find(int(i));
        if (it == values.end()) {
            std::ostringstream os;
            os << "verify: missing value for variable '" << vars_[i].label << "'";
            throw MalformedProblem(os.str());
        }
        if (it->second.rows() != vars_[i].rows || it->second.cols() != vars_[i].cols)
            throw MalformedProblem("verify: value shape mismatch");
    }

    double worst = 0.0;
    for (const auto& lmi : lmis_) {
        Matrix Mval = lmi.constant;
        for (const auto& t : lmi.terms) {
            const Matrix& V = values.at(t.var.idx);
            const Matrix P = t.L * V * t.R;
            const int r0 = lmi.block_offsets[t.row], c0 = lmi.block_offsets[t.col];
            Mval.block(r0, c0, P.rows(), P.cols()) += P;
            if (t.hermitize || t.row != t.col)
                Mval.block(c0, r0, P.cols(), P.rows()) += P.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(Mval), Eigen::EigenvaluesOnly);
        worst = std::max(worst, -es.eigenvalues().minCoeff());
    }
    for (const auto& eq : equalities_) {
        double lhs = 0.0;
        for (const auto& [v, C] : eq.coeffs) lhs += (C.array() * values.at(v.idx).array()).sum();
        worst = std::max(worst, std::abs(lhs - eq.rhs));
    }
    return VerifyResult{worst <= tol, worst};
}

std::string SdpProblem::export_text() const {
    SdpBackend bk(*this);
    std::ostringstream os;
    os.precision(17);
    os << "sdp-export 1\n";
    os << "coords " << bk.q << "\n";
    os << "cones " << bk.cone_order.size();
    for (int d : bk.cone_order) os << " " << d;
    os << "\n";
    os << "variables " << vars_.size() << "\n";
    for (const auto& v : vars_) {
        const char* kind = v.kind == VarKind::Symmetric ? "sym"
                           : v.kind == VarKind::Rect    ? "rect"
                                                        : "scalar";
        os << "var " << kind << " " << v.rows << " " << v.cols << " " << v.coord_offset << " "
           << v.label << "\n";
    }
    auto dump_vec = [&os](const char* tag, const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (v[i] != 0.0) os << tag << " " << i << " " << v[i] << "\n";
    };
    auto dump_mat = [&os](const char* tag, const Matrix& M) {
        for (Eigen::Index r = 0; r < M.rows(); ++r)
            for (Eigen::Index c = 0; c < M.cols(); ++c)
                if (M(r, c) != 0.0) os << tag << " " << r << " " << c << " " << M(r, c) << "\n";
    };
    dump_vec("c", bk.c);
    dump_mat("G", bk.G);
    dump_vec("h", bk.h);
    dump_mat("A", bk.A);
    dump_vec("b", bk.b);
    os << "end\n";
    return os.str();
}

}  // namespace cclqr
