#include "switchlq/chain.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace switchlq::chain {

namespace {
constexpr double kRowSumTol = 1e-12;
}

Generator validate_generator(const Mat& lambda) {
  if (lambda.rows() != lambda.cols() || lambda.rows() < 1) {
    throw ConfigError(ErrorCode::NonSquare,
                      "generator must be square, got " + std::to_string(lambda.rows()) + "x" +
                          std::to_string(lambda.cols()));
  }
  const int m0 = static_cast<int>(lambda.rows());
  Generator gen;
  gen.lambda = lambda;
  for (int i = 0; i < m0; ++i) {
    double row_sum = 0.0;
    int zero_rates = 0;
    for (int j = 0; j < m0; ++j) {
      row_sum += lambda(i, j);
      if (i == j) continue;
      if (lambda(i, j) < 0.0) {
        throw ConfigError(ErrorCode::NegativeRate,
                          "negative jump rate at (" + std::to_string(i) + "," +
                              std::to_string(j) + "): " + std::to_string(lambda(i, j)));
      }
      if (lambda(i, j) == 0.0) ++zero_rates;
    }
    if (std::abs(row_sum) > kRowSumTol) {
      throw ConfigError(ErrorCode::RowSumViolation,
                        "row " + std::to_string(i) + " sums to " + std::to_string(row_sum) +
                            " (|sum| must be <= 1e-12)");
    }
    if (m0 > 1 && zero_rates == m0 - 1) {
      gen.warnings.push_back("regime " + std::to_string(i) +
                             " is absorbing (all exit rates are zero)");
    } else if (zero_rates > 0) {
      gen.warnings.push_back("regime " + std::to_string(i) + " has " +
                             std::to_string(zero_rates) + " zero off-diagonal rate(s)");
    }
  }
  return gen;
}

Mat transition_matrix(const Generator& gen, double t) {
  if (t < 0.0) {
    throw ConfigError(ErrorCode::BadArgument, "transition matrix requires t >= 0");
  }
  Mat p = (t * gen.lambda).exp();
  // Clamp the tiny negative entries scaling-and-squaring can leave behind.
  for (int i = 0; i < p.rows(); ++i) {
    for (int j = 0; j < p.cols(); ++j) {
      if (p(i, j) < 0.0 && p(i, j) > -1e-13) p(i, j) = 0.0;
    }
  }
  return p;
}

int ChainPath::regime_at(double t) const {
  // cadlag: the regime entered at a jump applies from the jump time onward.
  int regime = initial_regime;
  for (std::size_t k = 0; k < jump_times.size() && jump_times[k] <= t; ++k) {
    regime = regimes[k];
  }
  return regime;
}

ChainPath sample_path(const Generator& gen, double start_time, int initial_regime,
                      double end_time, Rng& rng) {
  const int m0 = gen.num_regimes();
  if (initial_regime < 0 || initial_regime >= m0) {
    throw ConfigError(ErrorCode::BadArgument,
                      "initial regime " + std::to_string(initial_regime) + " out of range");
  }
  if (end_time < start_time) {
    throw ConfigError(ErrorCode::BadArgument, "end_time must be >= start_time");
  }
  ChainPath path;
  path.start_time = start_time;
  path.end_time = end_time;
  path.initial_regime = initial_regime;

  double t = start_time;
  int regime = initial_regime;
  while (true) {
    const double exit_rate = -gen.lambda(regime, regime);
    if (exit_rate <= 0.0) break;  // absorbing regime: no further jumps
    t += rng.exponential(exit_rate);
    if (t > end_time) break;
    // Choose the jump target proportional to the off-diagonal rates.
    double u = rng.uniform() * exit_rate;
    int target = -1;
    for (int j = 0; j < m0; ++j) {
      if (j == regime) continue;
      u -= gen.lambda(regime, j);
      if (u < 0.0) {
        target = j;
        break;
      }
    }
    if (target < 0) {  // guard against roundoff in the cumulative sum
      for (int j = m0 - 1; j >= 0; --j) {
        if (j != regime && gen.lambda(regime, j) > 0.0) {
          target = j;
          break;
        }
      }
    }
    path.jump_times.push_back(t);
    path.regimes.push_back(target);
    regime = target;
  }
  return path;
}

ChainPath sample_path(const Generator& gen, double start_time, int initial_regime,
                      double end_time, std::uint64_t seed) {
  Rng rng(seed);
  return sample_path(gen, start_time, initial_regime, end_time, rng);
}

Mat apply_generator(const Generator& gen, const PerRegime<Mat>& sigma, int regime) {
  const int m0 = gen.num_regimes();
  if (static_cast<int>(sigma.size()) != m0) {
    throw ConfigError(ErrorCode::DimensionMismatch,
                      "family has " + std::to_string(sigma.size()) + " entries, generator has " +
                          std::to_string(m0) + " regimes");
  }
  if (regime < 0 || regime >= m0) {
    throw ConfigError(ErrorCode::BadArgument, "regime index out of range");
  }
  Mat out = Mat::Zero(sigma[0].rows(), sigma[0].cols());
  for (int j = 0; j < m0; ++j) {
    if (sigma[j].rows() != out.rows() || sigma[j].cols() != out.cols()) {
      throw ConfigError(ErrorCode::DimensionMismatch, "family entries must share one shape");
    }
    out += gen.lambda(regime, j) * sigma[j];
  }
  return out;
}

CompensatedIncrements compensated_increments(const Generator& gen, const ChainPath& path) {
  const int m0 = gen.num_regimes();
  CompensatedIncrements out;
  const std::size_t num_jumps = path.jump_times.size();
  out.times.reserve(num_jumps + 1);
  out.increments.reserve(num_jumps + 1);

  double seg_start = path.start_time;
  int regime = path.initial_regime;
  for (std::size_t k = 0; k <= num_jumps; ++k) {
    const bool is_jump = k < num_jumps;
    const double seg_end = is_jump ? path.jump_times[k] : path.end_time;
    if (!is_jump && seg_end <= seg_start && k > 0) break;  // path ended exactly on a jump
    Mat inc = Mat::Zero(m0, m0);
    // Compensator: the chain sits in `regime` throughout (seg_start, seg_end).
    for (int j = 0; j < m0; ++j) {
      if (j != regime) inc(regime, j) -= gen.lambda(regime, j) * (seg_end - seg_start);
    }
    if (is_jump) inc(regime, path.regimes[k]) += 1.0;
    out.times.push_back(seg_end);
    out.increments.push_back(std::move(inc));
    if (is_jump) regime = path.regimes[k];
    seg_start = seg_end;
  }
  return out;
}

}  // namespace switchlq::chain
