#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "switchlq/chain.hpp"
#include "switchlq/rng.hpp"
#include "test_instances.hpp"

using namespace switchlq;

namespace {

chain::Generator two_state_gen() {
  Mat lambda(2, 2);
  lambda << -10.0, 10.0, 1.0, -1.0;
  return chain::validate_generator(lambda);
}

}  // namespace

TEST_CASE("generator validation rejects malformed rate matrices") {
  Mat bad(2, 3);
  bad.setZero();
  CHECK_THROWS_AS(chain::validate_generator(bad), ConfigError);
  try {
    chain::validate_generator(bad);
  } catch (const ConfigError& e) {
    CHECK(e.code() == ErrorCode::NonSquare);
  }

  Mat rowsum(2, 2);
  rowsum << -1.0, 1.0 + 1e-6, 2.0, -2.0;
  try {
    chain::validate_generator(rowsum);
    FAIL("row-sum violation not detected");
  } catch (const ConfigError& e) {
    CHECK(e.code() == ErrorCode::RowSumViolation);
  }

  Mat negative(2, 2);
  negative << 1.0, -1.0, 2.0, -2.0;
  try {
    chain::validate_generator(negative);
    FAIL("negative rate not detected");
  } catch (const ConfigError& e) {
    CHECK(e.code() == ErrorCode::NegativeRate);
  }
}

TEST_CASE("absorbing regimes validate with a warning") {
  Mat absorbing(2, 2);
  absorbing << 0.0, 0.0, 3.0, -3.0;
  const chain::Generator gen = chain::validate_generator(absorbing);
  CHECK(!gen.warnings.empty());

  const chain::Generator clean = two_state_gen();
  CHECK(clean.warnings.empty());
}

TEST_CASE("transition matrices form a stochastic semigroup") {
  const chain::Generator gen = two_state_gen();
  const Mat p1 = chain::transition_matrix(gen, 0.3);
  const Mat p2 = chain::transition_matrix(gen, 0.5);
  const Mat p12 = chain::transition_matrix(gen, 0.8);
  CHECK((p1 * p2 - p12).cwiseAbs().maxCoeff() < 1e-10);
  for (int i = 0; i < 2; ++i) {
    CHECK(p1.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(p1.row(i).minCoeff() >= 0.0);
  }
  CHECK((chain::transition_matrix(gen, 0.0) - Mat::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("two-state transition matrix matches the spectral closed form") {
  // lambda = [[-10, 10], [1, -1]] has eigenvalues {0, -11} and stationary
  // row (1/11, 10/11), so exp(t lambda) = Pi + e^{-11 t} (I - Pi) with Pi the
  // rank-one stationary projector.
  const chain::Generator gen = two_state_gen();
  Mat pi(2, 2);
  pi << 1.0 / 11.0, 10.0 / 11.0, 1.0 / 11.0, 10.0 / 11.0;
  for (double t : {0.05, 0.3, 2.0}) {
    const Mat expected = pi + std::exp(-11.0 * t) * (Mat::Identity(2, 2) - pi);
    CHECK((chain::transition_matrix(gen, t) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sampled occupation frequencies match the transition law") {
  const chain::Generator gen = two_state_gen();
  const int num_paths = 20000;
  const double t = 1.0;
  int hits = 0;
  for (int i = 0; i < num_paths; ++i) {
    Rng stream = Rng::for_path(2024, i);
    const chain::ChainPath path = chain::sample_path(gen, 0.0, 0, t, stream);
    if (path.regime_at(t) == 0) ++hits;
  }
  const double p = chain::transition_matrix(gen, t)(0, 0);
  const double se = std::sqrt(p * (1.0 - p) / num_paths);
  const double z = (static_cast<double>(hits) / num_paths - p) / se;
  CHECK(std::abs(z) < 3.0);
}

TEST_CASE("regime_at is cadlag") {
  chain::ChainPath path;
  path.start_time = 0.0;
  path.end_time = 1.0;
  path.initial_regime = 0;
  path.jump_times = {0.4, 0.9};
  path.regimes = {1, 0};
  CHECK(path.regime_at(0.0) == 0);
  CHECK(path.regime_at(0.4 - 1e-12) == 0);
  CHECK(path.regime_at(0.4) == 1);
  CHECK(path.regime_at(0.9) == 0);
  CHECK(path.regime_at(1.0) == 0);
}

TEST_CASE("apply_generator mixes regime blocks with the rates") {
  const chain::Generator gen = two_state_gen();
  PerRegime<Mat> sigma(2);
  sigma[0] = testing::mat2(1.0, 2.0, 3.0, 4.0);
  sigma[1] = testing::mat2(-1.0, 0.5, 0.0, 2.0);
  const Mat expected0 = -10.0 * sigma[0] + 10.0 * sigma[1];
  const Mat expected1 = 1.0 * sigma[0] - 1.0 * sigma[1];
  CHECK((chain::apply_generator(gen, sigma, 0) - expected0).norm() == 0.0);
  CHECK((chain::apply_generator(gen, sigma, 1) - expected1).norm() == 0.0);
}

TEST_CASE("compensated increments on hand-built paths") {
  const chain::Generator gen = two_state_gen();

  chain::ChainPath flat;
  flat.start_time = 0.0;
  flat.end_time = 0.7;
  flat.initial_regime = 0;
  const chain::CompensatedIncrements ci = chain::compensated_increments(gen, flat);
  REQUIRE(ci.times.size() == 1);
  CHECK(ci.times.back() == doctest::Approx(0.7));
  CHECK(ci.increments[0](0, 1) == doctest::Approx(-10.0 * 0.7).epsilon(1e-12));
  CHECK(ci.increments[0](1, 0) == 0.0);
  CHECK(ci.increments[0](0, 0) == 0.0);
  CHECK(ci.increments[0](1, 1) == 0.0);

  chain::ChainPath jump;
  jump.start_time = 0.0;
  jump.end_time = 1.0;
  jump.initial_regime = 0;
  jump.jump_times = {0.4};
  jump.regimes = {1};
  const chain::CompensatedIncrements cj = chain::compensated_increments(gen, jump);
  REQUIRE(cj.times.size() == 2);
  CHECK(cj.increments[0](0, 1) == doctest::Approx(1.0 - 10.0 * 0.4).epsilon(1e-12));
  CHECK(cj.increments[0](1, 0) == 0.0);
  CHECK(cj.increments[1](1, 0) == doctest::Approx(-1.0 * 0.6).epsilon(1e-12));
  CHECK(cj.increments[1](0, 1) == 0.0);
}

TEST_CASE("compensated increments are mean zero over sampled paths") {
  const chain::Generator gen = two_state_gen();
  const int num_paths = 5000;
  const double t = 1.5;
  Mat sum = Mat::Zero(2, 2);
  Mat sumsq = Mat::Zero(2, 2);
  for (int i = 0; i < num_paths; ++i) {
    Rng stream = Rng::for_path(99, i);
    const chain::ChainPath path = chain::sample_path(gen, 0.0, 0, t, stream);
    const chain::CompensatedIncrements ci = chain::compensated_increments(gen, path);
    Mat total = Mat::Zero(2, 2);
    for (const Mat& inc : ci.increments) total += inc;
    CHECK(total(0, 0) == 0.0);
    CHECK(total(1, 1) == 0.0);
    sum += total;
    sumsq += total.cwiseProduct(total);
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (i == j) continue;
      const double mean = sum(i, j) / num_paths;
      const double var = sumsq(i, j) / num_paths - mean * mean;
      const double se = std::sqrt(var / num_paths);
      CHECK(std::abs(mean) < 3.0 * se);
    }
  }
}

TEST_CASE("path sampling is deterministic in the seed") {
  const chain::Generator gen = two_state_gen();
  const chain::ChainPath a = chain::sample_path(gen, 0.0, 0, 5.0, std::uint64_t{42});
  const chain::ChainPath b = chain::sample_path(gen, 0.0, 0, 5.0, std::uint64_t{42});
  CHECK(a.jump_times == b.jump_times);
  CHECK(a.regimes == b.regimes);
  const chain::ChainPath c = chain::sample_path(gen, 0.0, 0, 5.0, std::uint64_t{43});
  CHECK(a.jump_times != c.jump_times);
}

TEST_CASE("random stream basics") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0.0;
  double sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));

  Rng b = Rng::for_path(1000, 3);
  Rng c = Rng::for_path(1000, 3);
  CHECK(b.normal() == c.normal());
  Rng a(1000);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
