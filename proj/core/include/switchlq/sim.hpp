#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "switchlq/bsde.hpp"
#include "switchlq/chain.hpp"
#include "switchlq/model.hpp"
#include "switchlq/riccati.hpp"
#include "switchlq/stability.hpp"
#include "switchlq/types.hpp"

namespace switchlq::sim {

/// Starting data for the state pair. The conditional mean starts at xi2; the
/// fluctuation component starts Wiener-linear, xi1_coef * W(s), matching the
/// admissible initial data of the stationary problem.
struct InitialCondition {
  double s = 0.0;
  int regime = 0;
  Vec xi2;
  Vec xi1_coef;
};

/// Affine control law in decomposed form:
///   u2(t) = theta2(regime) X2 + v2(t, regime) + scale * pert_g(t, regime),
///   u1(t) = theta1(regime) X1 + (v1_coef(t, regime)
///           + scale * pert_h(t, regime)) * W(t).
/// The perturbation process (dimension m) spans the affine directions used by
/// the first-order optimality check; scale 0 recovers the unperturbed law.
struct ControlLaw {
  stability::Gains gains;
  bsde::OffsetControls offsets;
  model::InhomogeneityProcess perturbation;
  double perturbation_scale = 0.0;
};

/// The synthesized optimal law (gains plus adjoint offsets).
ControlLaw feedback_law(const riccati::AreSolution& are, const bsde::OffsetControls& offsets);
/// Pure feedback with zero offsets (homogeneous problems).
ControlLaw feedback_law(const riccati::AreSolution& are);

struct SimConfig {
  InitialCondition init;
  double dt = 1e-3;
  /// Simulation end time. Nonpositive means "resolve from the stability
  /// certificate" via resolve_horizon.
  double horizon = -1.0;
  int num_paths = 1000;
  std::uint64_t seed = 1;
  /// Worker threads for estimate_cost; <= 0 uses the hardware count. Results
  /// are bitwise independent of this value (path index seeds the stream).
  int threads = 1;
  /// When set, every path reuses this regime trajectory instead of sampling
  /// one (conditional-mean studies). Must cover [s, horizon].
  std::optional<chain::ChainPath> fixed_chain;
};

/// Default end time: s + max(20 / epsilon, 2 * input support end), where
/// epsilon is the certified mean-square dissipation rate.
double resolve_horizon(const model::DecomposedModel& dm, const SimConfig& cfg, double epsilon);

/// One realized trajectory on the path's step grid (uniform dt with the
/// chain's jump times spliced in). Column j of the matrices belongs to t[j];
/// regime[j] rules [t[j], t[j+1]). U columns hold the controls actually
/// applied from t[j] on (new-regime values at jump nodes). cost is the
/// trapezoidal running-cost integral over [s, horizon].
struct PathRecord {
  std::vector<double> t;
  std::vector<int> regime;
  std::vector<double> W;
  Mat X1, X2;  ///< n x #nodes
  Mat U1, U2;  ///< m x #nodes
  double cost = 0.0;
};

/// Runs paths sequentially and invokes the visitor with (path index, record);
/// the record buffer is reused between calls. Path i draws from stream
/// seed ^ i regardless of visit order, so results are reproducible.
void for_each_path(const model::DecomposedModel& dm, const ControlLaw& law, const SimConfig& cfg,
                   const std::function<void(int, const PathRecord&)>& visit);

/// Collects full records for all paths. Memory scales with num_paths times
/// the grid size; intended for small studies and debugging dumps.
std::vector<PathRecord> simulate_paths(const model::DecomposedModel& dm, const ControlLaw& law,
                                       const SimConfig& cfg);

/// Common-random-numbers cost table: entry (i, l) is the realized cost of
/// law l on path i, with the chain path and every Wiener increment shared
/// across laws. Single-threaded and deterministic.
Mat crn_costs(const model::DecomposedModel& dm, const std::vector<ControlLaw>& laws,
              const SimConfig& cfg);

struct CostEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  /// Upper bound on the truncated tail cost, valid when the law's gains are
  /// the certified ones and the horizon covers the input support:
  /// 0.5 * c_max * (terminal certified moment) / epsilon.
  double tail_bound = 0.0;
  double terminal_moment = 0.0;
  double horizon = 0.0;
  int num_paths = 0;
};

/// Monte Carlo cost of a control law, with the certificate-based tail bound.
/// Uses cfg.threads workers; the path-indexed reduction keeps the result
/// bitwise identical for any thread count.
CostEstimate estimate_cost(const model::DecomposedModel& dm, const ControlLaw& law,
                           const SimConfig& cfg, const riccati::AreSolution& are);

/// First-order optimality statistics for one perturbation direction, from
/// common-random-number central differences at scales epsilon and 2 epsilon.
/// For linear dynamics and quadratic cost the per-path cost is exactly
/// quadratic in the scale, so both derivative estimates target the same
/// number and the per-path curvature is nonnegative by the weight
/// definiteness assumptions.
struct DirectionStat {
  double deriv = 0.0;
  double deriv_z = 0.0;
  double deriv_wide = 0.0;
  double deriv_wide_z = 0.0;
  double curvature = 0.0;
  double curvature_se = 0.0;
};

struct StationarityReport {
  double epsilon = 0.0;
  std::vector<DirectionStat> directions;
  double max_abs_z = 0.0;
  bool curvature_ok = false;
  int num_paths = 0;

  bool pass(double max_z) const { return curvature_ok && max_abs_z < max_z; }
};

/// Tests the candidate optimum against affine perturbations: for each
/// direction, simulates the base law and the four scaled variants
/// {+e, -e, +2e, -2e} under common random numbers and z-scores the central
/// difference of the cost. cfg.horizon must be positive.
StationarityReport stationarity_check(const model::DecomposedModel& dm,
                                      const riccati::AreSolution& are,
                                      const bsde::OffsetControls& offsets,
                                      const std::vector<model::InhomogeneityProcess>& directions,
                                      double epsilon, const SimConfig& cfg);

/// Bucketed mean-zero test of the solution-induced chain martingales
///   M_k(t) = P_k(alpha(t)) + int_s^t G_k(alpha(tau)) dtau,
/// where G_k is the gain-cost part of the stationary equation (so that
/// G_k = -(Lambda P_k) exactly at a solution). Only the chain is simulated;
/// the compensator integral is exact on each constant-regime segment.
/// z1/z2 hold one z-score per (bucket, symmetric coordinate).
struct MartingaleReport {
  std::vector<double> bucket_times;
  Mat z1, z2;
  double max_abs_z = 0.0;
  int num_paths = 0;

  bool pass(double max_z) const { return max_abs_z < max_z; }
};

MartingaleReport martingale_check(const model::DecomposedModel& dm, const PerRegime<Mat>& P1,
                                  const PerRegime<Mat>& P2, const SimConfig& cfg,
                                  int num_buckets = 20);
MartingaleReport martingale_check(const model::DecomposedModel& dm,
                                  const riccati::AreSolution& are, const SimConfig& cfg,
                                  int num_buckets = 20);

}  // namespace switchlq::sim
