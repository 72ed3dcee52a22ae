#pragma once

#include <map>
#include <string>
#include <vector>

#include "cclqr/linalg.hpp"

namespace cclqr {

// Dense semidefinite programming: linear objective over symmetric-matrix,
// rectangular-matrix and scalar variables, subject to affine LMIs
// (constant + sum of linear terms >= 0) and scalar linear equalities.
//
// The embedded solver is a primal-dual interior-point method on the
// homogeneous self-dual embedding with Nesterov-Todd scaling and a
// Mehrotra predictor-corrector; it reports Optimal / Infeasible /
// Unbounded / MaxIterations / NumericalFailure.  The SdpProblem /
// SdpSolution types form a seam: an alternate backend can be substituted
// behind the same contract.

struct VarId {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

enum class SdpStatus { Optimal, Infeasible, Unbounded, MaxIterations, NumericalFailure };

std::string to_string(SdpStatus s);

struct SdpSettings {
    double feas_tol = 1e-8;
    double gap_tol = 1e-8;
    int max_iter = 200;
    double step_frac = 0.99;   // fraction of the step to the cone boundary
    int refine_steps = 2;      // iterative-refinement passes on KKT solves
};

struct SdpSolution {
    SdpStatus status = SdpStatus::NumericalFailure;
    std::map<int, Matrix> values;  // variable id -> value (1x1 for scalars)
    double objective_value = 0.0;
    int iterations = 0;
    double duality_gap = 0.0;

    const Matrix& value(VarId v) const;
    double scalar(VarId v) const;
};

struct VerifyResult {
    bool feasible = false;
    double worst_violation = 0.0;  // most negative LMI eigenvalue or largest
                                   // equality residual, as a magnitude
};

class SdpProblem {
  public:
    VarId add_symmetric(int order, std::string label);
    VarId add_rect(int rows, int cols, std::string label);
    VarId add_scalar(std::string label);

    // objective += <C, V> (trace inner product; C must match the variable
    // shape, 1x1 for scalars).  Minimization throughout.
    void objective_add(VarId v, const Matrix& C);
    void objective_add(VarId v, double coeff);

    // Creates an empty LMI "constant + sum terms >= 0" of the given order,
    // laid out in square blocks of the given sizes.  Returns its index.
    int add_lmi(const std::vector<int>& block_sizes);

    // LMI constant += M at block (row, col); if hermitize, the transpose is
    // mirrored into block (col, row).
    void lmi_add_constant(int lmi, const Matrix& M, int row = 0, int col = 0,
                          bool hermitize = false);

    // LMI term += L * V * R at block (row, col) for variable v (V is the
    // variable value; scalars act as 1x1).  With hermitize, R^T V^T L^T is
    // mirrored into block (col, row); required whenever row != col or the
    // placed product is not itself symmetric.
    void lmi_add_term(int lmi, VarId v, const Matrix& L, const Matrix& R, int row = 0,
                      int col = 0, bool hermitize = false);

    // sum_v <C_v, V_v> = rhs
    void add_equality(const std::vector<std::pair<VarId, Matrix>>& coeffs, double rhs);

    int num_variables() const { return int(vars_.size()); }
    int num_lmis() const { return int(lmis_.size()); }
    int num_equalities() const { return int(equalities_.size()); }

    // Plain-text standard-form export (sparse triplets); format documented
    // in the repo docs.
    std::string export_text() const;

    SdpSolution solve(const SdpSettings& settings = {}) const;

    // Evaluates all LMIs and equalities at the given variable values.
    VerifyResult verify(const std::map<int, Matrix>& values, double tol = 1e-8) const;

  private:
    friend struct SdpBackend;

    enum class VarKind { Symmetric, Rect, Scalar };
    struct Variable {
        VarKind kind;
        int rows, cols;
        std::string label;
        int coord_offset;  // first flat coordinate
        int coord_count;
    };
    struct Term {
        VarId var;
        Matrix L, R;
        int row, col;
        bool hermitize;
    };
    struct Lmi {
        int order;
        std::vector<int> block_offsets;  // prefix offsets of the square blocks
        Matrix constant;
        std::vector<Term> terms;
    };
    struct Equality {
        std::vector<std::pair<VarId, Matrix>> coeffs;
        double rhs;
    };

    const Variable& var_checked(VarId v, const char* who) const;
    void check_block(const Lmi& lmi, const Matrix& M, int row, int col, const char* who) const;

    std::vector<Variable> vars_;
    std::vector<Lmi> lmis_;
    std::vector<Equality> equalities_;
    std::vector<std::pair<VarId, Matrix>> objective_;
    int total_coords_ = 0;
};

}  // namespace cclqr
