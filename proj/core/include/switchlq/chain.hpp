#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "switchlq/rng.hpp"
#include "switchlq/types.hpp"

namespace switchlq::chain {

/// Validated generator matrix of a continuous-time finite-state Markov chain.
/// Off-diagonal entries are jump rates (nonnegative), each row sums to zero.
struct Generator {
  Mat lambda;                          ///< m0 x m0 rate matrix
  std::vector<std::string> warnings;   ///< non-fatal validation notes

  int num_regimes() const { return static_cast<int>(lambda.rows()); }
};

/// Checks squareness, nonnegative off-diagonal rates, and zero row sums
/// (within 1e-12). Structurally degenerate but legal inputs (zero off-diagonal
/// rows, i.e. absorbing regimes; isolated regimes) pass with a warning.
/// Throws ConfigError on violations.
Generator validate_generator(const Mat& lambda);

/// Transition probability matrix exp(t * lambda) for t >= 0.
/// Rows sum to one within 1e-10.
Mat transition_matrix(const Generator& gen, double t);

/// One realized trajectory of the chain on [start_time, end_time].
/// The regime process is cadlag: it equals `initial_regime` on
/// [start_time, jump_times[0]) and `regimes[k]` on [jump_times[k], jump_times[k+1]).
struct ChainPath {
  double start_time = 0.0;
  double end_time = 0.0;
  int initial_regime = 0;
  std::vector<double> jump_times;  ///< strictly increasing, inside (start_time, end_time]
  std::vector<int> regimes;        ///< regime entered at each jump; same length as jump_times

  int regime_at(double t) const;
};

/// Samples a chain path by exact simulation: exponential holding times with
/// the current regime's total exit rate, jump targets proportional to the
/// off-diagonal rates. Absorbing regimes hold forever.
ChainPath sample_path(const Generator& gen, double start_time, int initial_regime,
                      double end_time, Rng& rng);
ChainPath sample_path(const Generator& gen, double start_time, int initial_regime,
                      double end_time, std::uint64_t seed);

/// Action of the generator on a regime-indexed family of matrices:
/// (lambda Sigma)(regime) = sum_j lambda(regime, j) * Sigma(j).
Mat apply_generator(const Generator& gen, const PerRegime<Mat>& sigma, int regime);

/// Increments of the compensated jump martingales M_ij over a path's jump grid.
/// Segment r covers (times[r-1], times[r]] (times[-1] := start_time); entry
/// (i, j), i != j, of increments[r] is the counting-measure increment of
/// transitions i -> j minus the compensator integral over the segment.
/// Diagonal entries are identically zero.
struct CompensatedIncrements {
  std::vector<double> times;    ///< segment right endpoints; last equals end_time
  std::vector<Mat> increments;  ///< one m0 x m0 matrix per segment
};

CompensatedIncrements compensated_increments(const Generator& gen, const ChainPath& path);

}  // namespace switchlq::chain
