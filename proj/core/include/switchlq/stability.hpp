#pragma once

#include <optional>

#include "switchlq/model.hpp"
#include "switchlq/types.hpp"

namespace switchlq::stability {

/// Linear state feedback for both components: u_k = theta_k(regime) * X_k.
struct Gains {
  PerRegime<Mat> theta1;  ///< m x n per regime
  PerRegime<Mat> theta2;

  static Gains zero(int n, int m, int num_regimes);
};

/// Dimension of the symmetric-matrix coordinate space: n(n+1)/2.
int sym_dim(int n);

/// Coordinates of a symmetric matrix in the orthonormal symmetric basis
/// (diagonal units and normalized off-diagonal pairs); the Frobenius inner
/// product becomes the Euclidean one. Pairs (i, j), i <= j, are scanned in
/// row order.
Vec svec(const Mat& m);
Mat unsvec(const Vec& v, int n);

/// Matrix of the closed-loop second-moment flow in the svec basis, acting on
/// stacked blocks [component 1, regimes in order; component 2, regimes in
/// order]. Component 2 feeds component 1 through the mean-loading diffusion
/// term, so the matrix is block triangular.
Mat second_moment_generator(const model::DecomposedModel& dm, const Gains& gains);

/// Matrix of the adjoint (Lyapunov) operator in the same basis; equals the
/// literal transpose of second_moment_generator.
Mat lyapunov_operator(const model::DecomposedModel& dm, const Gains& gains);

/// Largest real part over the spectrum of the given operator matrix.
double spectral_abscissa(const Mat& op);

/// First-moment flow of one component of the closed loop, acting on stacked
/// regime-indexed vectors (dimension m0 * n); component k in {1, 2}.
Mat first_moment_operator(const model::DecomposedModel& dm, const Gains& gains, int k);

struct CoupledLyapunovSolution {
  PerRegime<Mat> P1, P2;
};

/// Solves the coupled Lyapunov system
///   (Lambda P_k)(i) + A_k^theta(i)^T P_k(i) + P_k(i) A_k^theta(i)
///     + C_k^theta(i)^T P_1(i) C_k^theta(i) + L_k(i) = 0
/// for symmetric P given symmetric positive definite L. Throws
/// SolverError(SingularOperator) when the spectral abscissa is within 1e-10
/// of zero; returns nullopt (infeasible) when the unique solution exists but
/// some P_k(i) is not positive definite.
std::optional<CoupledLyapunovSolution> solve_coupled_lyapunov(const model::DecomposedModel& dm,
                                                              const Gains& gains,
                                                              const PerRegime<Mat>& L1,
                                                              const PerRegime<Mat>& L2);

/// Quadratic stability certificate: positive definite P with dissipation
/// rate epsilon > 0 for the closed-loop second-moment flow (built with
/// L = identity), together with the measured spectral abscissa.
struct StabilityCertificate {
  PerRegime<Mat> P1, P2;
  double epsilon = 0.0;
  double abscissa = 0.0;
};

/// Certifies mean-square stability of the closed loop, or returns nullopt if
/// the closed loop is unstable. Throws SolverError(SingularOperator) when the
/// abscissa is numerically on the stability boundary.
std::optional<StabilityCertificate> certify(const model::DecomposedModel& dm, const Gains& gains);

/// True iff certify succeeds.
bool is_stabilizer(const model::DecomposedModel& dm, const Gains& gains);

}  // namespace switchlq::stability
