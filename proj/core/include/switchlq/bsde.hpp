#pragma once

#include "switchlq/model.hpp"
#include "switchlq/riccati.hpp"
#include "switchlq/types.hpp"

namespace switchlq::bsde {

/// Deterministic drivers of the adjoint backward system, induced by the
/// model's affine inhomogeneities under the optimal feedback. f1 drives the
/// Wiener-proportional profile w1, f2 the chain-deterministic profile y2 (the
/// cross-coupling of w1 into the y2 equation is applied by the solver itself,
/// it is not part of f2). Both are piecewise linear with compact support and
/// stored in the deterministic (g) slot of an InhomogeneityProcess.
struct Drivers {
  model::InhomogeneityProcess f1;  ///< dim n
  model::InhomogeneityProcess f2;  ///< dim n
};

Drivers assemble_drivers(const model::DecomposedModel& dm, const PerRegime<Mat>& P1,
                         const PerRegime<Mat>& P2, const stability::Gains& gains);

/// Solution of the adjoint backward system on [0, T_in]: for inputs in the
/// supported class the adjoint pair is Y2(t) = y2(t, regime(t)) and
/// Y1(t) = w1(t, regime(t)) W(t), with martingale integrand Z = w1 (its
/// component-1 projection vanishes). Identically zero for t >= T_in.
struct AdjointSolution {
  double T_in = 0.0;
  std::vector<double> t;  ///< ascending grid over [0, T_in]
  PerRegime<Mat> y2;      ///< per regime: n x grid size
  PerRegime<Mat> w1;

  Vec y2_at(double time, int regime) const;
  Vec w1_at(double time, int regime) const;
  void y2_at(double time, int regime, Vec& out) const;
  void w1_at(double time, int regime, Vec& out) const;
};

/// Integrates the coupled backward system
///   -dw1/dt (i) = (Lambda w1)(i) + A_1^theta(i)^T w1(i) + f1(t, i)
///   -dy2/dt (i) = (Lambda y2)(i) + A_2^theta(i)^T y2(i)
///                 + C_2^theta(i)^T w1(t, i) + f2(t, i)
/// from the zero terminal value at T_in with fourth-order Runge-Kutta on a
/// grid aligned with the driver breakpoints (so the piecewise-linear kinks
/// are grid points and full order is kept). The system is solved at the
/// requested step and at half the step; if the solutions disagree by more
/// than `grid_check_tol` in sup norm the grid is rejected with
/// SolverError(GridTooCoarse), otherwise the finer solution is returned.
AdjointSolution solve_adjoint(const model::DecomposedModel& dm, const riccati::AreSolution& are,
                              const Drivers& drivers, double step = 1e-3,
                              double grid_check_tol = 1e-8);

/// Offset (affine) parts of the optimal control on the adjoint grid:
/// u2 = theta2 X2 + v2(t, regime), u1 = theta1 X1 + v1_coef(t, regime) W(t).
struct OffsetControls {
  double T_in = 0.0;
  std::vector<double> t;
  PerRegime<Mat> v2;       ///< per regime: m x grid size
  PerRegime<Mat> v1_coef;  ///< per regime: m x grid size

  Vec v2_at(double time, int regime) const;
  Vec v1_coef_at(double time, int regime) const;
  void v2_at(double time, int regime, Vec& out) const;
  void v1_coef_at(double time, int regime, Vec& out) const;

  static OffsetControls zero(int m, int num_regimes);
};

OffsetControls compute_offsets(const model::DecomposedModel& dm, const riccati::AreSolution& are,
                               const AdjointSolution& adjoint);

/// The two candidate sign conventions for the inhomogeneous part of the
/// optimal-value formula. `Derivation` follows the completed-squares
/// derivation (linear and variance terms positive, squared offsets
/// subtracted); `AlternateBox` negates the linear and variance terms as well.
enum class ValueConvention { Derivation, AlternateBox };

const char* to_string(ValueConvention convention);

/// Optimal cost-to-go from initial time s, initial regime, chain-conditional
/// mean xi2 and fluctuation xi1_coef * W(s):
///   V = 1/2 [ <P2 xi2, xi2> + s <P1 xi1c, xi1c> + 2 <y2(s), xi2>
///             + 2 s <w1(s), xi1c> ]
///       + 1/2 Integral_s^{T_in} sum_j p_{regime,j}(t - s) * I(t, j) dt,
/// where the transition-weighted integrand I carries the inhomogeneity
/// contributions under the chosen sign convention and the quadrature runs on
/// the adjoint grid.
double optimal_value(const model::DecomposedModel& dm, const riccati::AreSolution& are,
                     const AdjointSolution& adjoint, double s, int regime, const Vec& xi1_coef,
                     const Vec& xi2, ValueConvention convention = ValueConvention::Derivation);

}  // namespace switchlq::bsde
