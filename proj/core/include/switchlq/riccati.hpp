#pragma once

#include "switchlq/model.hpp"
#include "switchlq/stability.hpp"
#include "switchlq/types.hpp"

namespace switchlq::riccati {

/// Right-hand side F_k of the coupled Riccati system, one symmetric n x n
/// block per (component, regime):
///   F_k = (Lambda P_k)(i) + P_k A_k + A_k^T P_k + C_k^T P_1 C_k + Q_k
///         - (B_k^T P_k + D_k^T P_1 C_k + S_k)^T (R_k + D_k^T P_1 D_k)^{-1}
///           (B_k^T P_k + D_k^T P_1 C_k + S_k),
/// where both diffusion corrections use the component-1 solution. Inputs are
/// symmetrized before evaluation and the result is symmetric. Throws
/// SolverError(GainSingular) when some effective control weight
/// R_k + D_k^T P_1 D_k has minimum eigenvalue <= 1e-10.
struct RiccatiRhs {
  PerRegime<Mat> F1, F2;
};

RiccatiRhs riccati_rhs(const model::DecomposedModel& dm, const PerRegime<Mat>& P1,
                       const PerRegime<Mat>& P2);

/// Backward solution of the finite-horizon Riccati system with terminal
/// condition zero at time T, stored on an ascending time grid over [0, T].
struct RiccatiTrajectory {
  std::vector<double> t;
  std::vector<PerRegime<Mat>> P1;  ///< P1[i] holds all regimes at time t[i]
  std::vector<PerRegime<Mat>> P2;
};

/// Classic fourth-order Runge-Kutta marching from the zero terminal value,
/// re-symmetrizing after every step. Throws SolverError(StepRejected) if an
/// iterate becomes non-finite or exceeds 1e12 in norm.
RiccatiTrajectory integrate_finite_horizon(const model::DecomposedModel& dm, double T,
                                           double step);

/// Stationary solution bundle: P blocks, the optimal feedback gains, the
/// final algebraic residual, and a closed-loop stability certificate.
struct AreSolution {
  PerRegime<Mat> P1, P2;
  stability::Gains gains;
  double residual_norm = 0.0;
  stability::StabilityCertificate certificate;
  double final_horizon = 0.0;
  int iterations = 0;
};

/// Solves the stationary system by horizon doubling: the finite-horizon
/// solution is continued backward over successively doubled horizons
/// T0, 2 T0, 4 T0, ... until the value at the far end moves by less than
/// `tol` in Frobenius norm, then the algebraic residual, effective control
/// weights, and closed-loop certificate are verified. Throws
/// SolverError(NotStabilizable) when the horizon limit Tmax is reached
/// without convergence or a final check fails.
AreSolution solve_are(const model::DecomposedModel& dm, double tol = 1e-9, double T0 = 1.0,
                      double Tmax = 4096.0, double step = 2e-3);

/// Solves the stationary system by gain iteration from a stabilizing initial
/// feedback: each sweep solves the closed-loop coupled Lyapunov equation with
/// the running cost of the current gain and re-synthesizes the gain from the
/// result. Quadratically convergent near the solution; iterates are monotone
/// nonincreasing. Throws SolverError(NotStabilizing) if theta0 (or, through
/// numerical degeneracy, an iterate) fails to stabilize, and
/// SolverError(Stalled) when updates stop contracting before reaching tol.
AreSolution newton_kleinman(const model::DecomposedModel& dm, const stability::Gains& theta0,
                            double tol = 1e-10, int max_iterations = 60);

/// Optimal feedback for given P blocks:
///   theta_k = -(R_k + D_k^T P_1 D_k)^{-1} (B_k^T P_k + D_k^T P_1 C_k + S_k).
stability::Gains synthesize_feedback(const model::DecomposedModel& dm, const PerRegime<Mat>& P1,
                                     const PerRegime<Mat>& P2);

}  // namespace switchlq::riccati
