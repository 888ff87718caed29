#pragma once

#include <string>
#include <vector>

#include "switchlq/chain.hpp"
#include "switchlq/types.hpp"

namespace switchlq::model {

/// Piecewise-linear, compactly supported inhomogeneity of the form
///   value(t, regime) = g(t, regime) + h(t, regime) * W(t),
/// where W is the driving Wiener process. g and h are continuous piecewise
/// linear in t between `breakpoints`, clamped to the first/last breakpoint
/// value inside [0, T_in], and identically zero for t > T_in.
struct InhomogeneityProcess {
  double T_in = 0.0;
  std::vector<double> breakpoints;  ///< strictly increasing, inside [0, T_in]
  PerRegime<Mat> g;                 ///< per regime: dim x num_breakpoints
  PerRegime<Mat> h;                 ///< per regime: dim x num_breakpoints

  bool is_zero() const;
  int dim() const;

  /// Samples the deterministic part at (t, regime); zero for t > T_in.
  Vec g_at(double t, int regime) const;
  /// Samples the Wiener-linear coefficient at (t, regime); zero for t > T_in.
  Vec h_at(double t, int regime) const;

  /// Allocation-free variants used in simulation inner loops.
  void g_at(double t, int regime, Vec& out) const;
  void h_at(double t, int regime, Vec& out) const;

  /// A process that is identically zero with the given dimension.
  static InhomogeneityProcess zero(int dim, int num_regimes);
};

/// Coefficients of one regime of the control problem in its original form.
/// State dimension n, control dimension m. The `*bar` matrices multiply the
/// chain-conditional mean of the state/control.
struct RegimeCoefficients {
  Mat A, Abar;  ///< n x n drift
  Mat B, Bbar;  ///< n x m control-to-drift
  Mat C, Cbar;  ///< n x n state-to-diffusion
  Mat D, Dbar;  ///< n x m control-to-diffusion
  Mat Q, Qbar;  ///< n x n state weights (symmetric)
  Mat S, Sbar;  ///< m x n cross weights
  Mat R, Rbar;  ///< m x m control weights (symmetric)
};

/// Full problem data: chain generator, per-regime coefficients, and the
/// affine inhomogeneities (b: drift, sigma: diffusion, q/qbar: linear state
/// cost, r/rbar: linear control cost).
struct ProblemSpec {
  int n = 0;
  int m = 0;
  chain::Generator gen;
  PerRegime<RegimeCoefficients> regimes;
  InhomogeneityProcess b;      ///< dim n
  InhomogeneityProcess sigma;  ///< dim n
  InhomogeneityProcess q;      ///< dim n
  InhomogeneityProcess qbar;   ///< dim n, deterministic part only
  InhomogeneityProcess r;      ///< dim m
  InhomogeneityProcess rbar;   ///< dim m, deterministic part only
};

struct ValidationIssue {
  ErrorCode code;
  std::string message;
};

/// Outcome of validating a ProblemSpec. Collects every problem found instead
/// of stopping at the first; never throws.
struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<std::string> warnings;
  /// Definiteness margins, one entry per (component k, regime): smallest
  /// eigenvalue of R_k and of Q_k - S_k^T R_k^{-1} S_k. Component 1 margins
  /// come first. Populated only for the checks that could be evaluated.
  std::vector<double> control_weight_margins;
  std::vector<double> state_weight_margins;

  bool ok() const { return errors.empty(); }
  std::string summary() const;
};

ValidationReport validate(const ProblemSpec& spec);

/// Coefficients of one regime after splitting the state into the
/// chain-conditional mean (component 2) and the fluctuation around it
/// (component 1): A1 = A, A2 = A + Abar, and likewise for B, C, D, Q, S, R.
/// Component 1 evolves as an SDE whose diffusion loads both components
/// (C1, C2, D1, D2); component 2 evolves as a regime-switching ODE.
struct DecomposedRegime {
  Mat A1, A2;
  Mat B1, B2;
  Mat C1, C2;
  Mat D1, D2;
  Mat Q1, Q2;
  Mat S1, S2;
  Mat R1, R2;
};

/// Decomposed problem. The inhomogeneities are split by the same projection:
/// component 1 keeps the Wiener-linear part (h), component 2 the
/// deterministic part (g); qbar/rbar fold into the component-2 linear costs.
struct DecomposedModel {
  int n = 0;
  int m = 0;
  chain::Generator gen;
  PerRegime<DecomposedRegime> regimes;
  InhomogeneityProcess b1, b2;          ///< dim n; b1 h-only, b2 g-only
  InhomogeneityProcess sigma1, sigma2;  ///< dim n
  InhomogeneityProcess q1, q2;          ///< dim n; q2 includes qbar
  InhomogeneityProcess r1, r2;          ///< dim m; r2 includes rbar

  int num_regimes() const { return gen.num_regimes(); }
};

/// Validates and decomposes. Throws ConfigError if validation fails.
DecomposedModel decompose(const ProblemSpec& spec);

/// Exact inverse of decompose (up to the qbar/rbar fold, which is returned
/// through q/r of component 2 with qbar/rbar zero). Used to check that the
/// decomposition loses nothing.
ProblemSpec recompose(const DecomposedModel& dm);

/// Projection of an inhomogeneity onto one component: k = 1 keeps the
/// Wiener-linear part, k = 2 the deterministic part. Idempotent.
InhomogeneityProcess project(int k, const InhomogeneityProcess& proc);

/// Pointwise sum of two processes on the union of their breakpoint grids.
/// Exact when both are continuous at their own support ends (the usual case:
/// values decay to zero at T_in); otherwise the jump at the earlier support
/// end is linearized between the surrounding union breakpoints.
InhomogeneityProcess merge_sum(const InhomogeneityProcess& a, const InhomogeneityProcess& b);

/// Largest support end among the model's inhomogeneities (0 when all vanish).
double input_support_end(const DecomposedModel& dm);

}  // namespace switchlq::model
