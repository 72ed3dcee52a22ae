#pragma once

#include <vector>

#include "cclqr/synthesis.hpp"

// Output feedback via a stationary Kalman filter.  The filter runs in
// one-step-predictor form,
//   xhat_{t+1} = A xhat_t + B u_t + L (y_t - C xhat_t),
// so L and E are the predictor Riccati quantities and the prediction error
// e = x - xhat is uncorrelated with xhat in steady state.  Controller
// design then splits cleanly: L depends only on (A, C, W, V), and the gain
// K acts on the estimate, whose stationary covariance S obeys a Lyapunov
// equation driven by (LC) E (LC)' + L V L'.  With Z = K S both the
// stationarity condition and the input-side reformulations are again
// linear, while state-side constraints act on X >= S + E.

namespace cclqr {

namespace tol {
inline constexpr double kf = 1e-11;  // Riccati fixed-point tolerance, relative
}  // namespace tol

inline constexpr int kf_max_iter = 100000;

struct EstimatorDesign {
    Matrix L;  // n x p estimator gain
    Matrix E;  // n x n stationary prediction-error covariance
};

struct OutputFeedbackResult {
    Matrix K;     // m x n feedback gain acting on the estimate
    Matrix L;     // n x p estimator gain
    Matrix E;     // stationary prediction-error covariance
    Matrix Sbar;  // stationary covariance of the estimate
    Matrix Xbar;  // stationary state covariance, Sbar + E
    double cost = 0.0;
    std::vector<int> active_constraints;
    SdpSolution stats;
};

// Stationary predictor gain and error covariance by fixed-point iteration
// of the Riccati map from P0 = W.  Throws NotObservable when the iteration
// fails to settle within kf_max_iter or leaves A - L C unstable, and
// DimensionMismatch when the model carries no output.
EstimatorDesign design_kalman(const SystemModel& model);

// One application of the predictor Riccati map
//   P -> A P A' - A P C' (C P C' + V)^{-1} C P A' + W.
// design_kalman iterates this to its fixed point E.
Matrix kalman_riccati_map(const SystemModel& model, const Matrix& P);

// Appends the estimate-covariance stationarity LMI
//   [ S - (LC) E (LC)' - L V L', A S + B Z; (A S + B Z)', S ] >= 0
// to `p`; returns the LMI handle.
int add_kf_stationarity_lmi(SdpProblem& p, const SystemModel& model,
                            const EstimatorDesign& design, VarId S, VarId Z);

// Appends the coupling X - S - E >= 0 tying the state covariance bound to
// the estimate covariance; returns the LMI handle.
int add_kf_coupling_lmi(SdpProblem& p, const EstimatorDesign& design, VarId X, VarId S);

// Stationary covariances of the estimate and the state under u = K xhat:
//   Sbar = solve_discrete_lyapunov(A + B K, (LC) E (LC)' + L V L')
//   Xbar = Sbar + E.
// Throws NotStable when A + B K is not strictly stable.
std::pair<Matrix, Matrix> kf_stationary_covariances(const SystemModel& model, const Matrix& K,
                                                    const EstimatorDesign& design);

// Chance-constrained design over (S, Z): state constraints read the state
// covariance S + E, input constraints and the cost read (S, Z), and
// K = Z S^{-1}.  Errors as synthesize_constrained, plus the design_kalman
// failure modes.
OutputFeedbackResult synthesize_output_feedback(
    const SystemModel& model, const CostSpec& cost,
    const std::vector<ChanceConstraint>& constraints = {});

}  // namespace cclqr
