#pragma once

// Shared problem fixtures used by the unit tests and the acceptance runner.

#include <vector>

#include "switchlq/model.hpp"
#include "switchlq/rng.hpp"
#include "switchlq/stability.hpp"

namespace switchlq::testing {

inline Mat mat2(double a00, double a01, double a10, double a11) {
  Mat m(2, 2);
  m << a00, a01, a10, a11;
  return m;
}

inline Mat row2(double a, double b) {
  Mat m(1, 2);
  m << a, b;
  return m;
}

inline Mat col2(double a, double b) {
  Mat m(2, 1);
  m << a, b;
  return m;
}

inline Mat scal(double a) {
  Mat m(1, 1);
  m << a;
  return m;
}

inline model::InhomogeneityProcess make_process(double t_in, std::vector<double> bps,
                                                PerRegime<Mat> g, PerRegime<Mat> h = {}) {
  model::InhomogeneityProcess p;
  p.T_in = t_in;
  p.breakpoints = std::move(bps);
  const int nbp = static_cast<int>(p.breakpoints.size());
  if (h.empty() && !g.empty()) {
    h.assign(g.size(), Mat::Zero(g[0].rows(), nbp));
  }
  p.g = std::move(g);
  p.h = std::move(h);
  return p;
}

/// Two-regime scalar switching system whose separate regimes are not both
/// stable (A = +1 in regime 0) yet whose switched flow is: certificate blocks
/// proportional to (13/14, 9/14) with ratio 9/13 in (1/3, 4/5), spectral
/// abscissa (-11 + sqrt(65)) / 2. Deterministic dynamics, no control surface.
inline model::ProblemSpec make_switching_scalar() {
  model::ProblemSpec spec;
  spec.n = 1;
  spec.m = 1;
  Mat lambda(2, 2);
  lambda << -10.0, 10.0, 1.0, -1.0;
  spec.gen = chain::validate_generator(lambda);
  for (double a : {1.0, -1.0}) {
    model::RegimeCoefficients rc;
    rc.A = scal(a);
    rc.Abar = scal(0.0);
    rc.B = scal(0.0);
    rc.Bbar = scal(0.0);
    rc.C = scal(0.0);
    rc.Cbar = scal(0.0);
    rc.D = scal(0.0);
    rc.Dbar = scal(0.0);
    rc.Q = scal(1.0);
    rc.Qbar = scal(0.0);
    rc.S = scal(0.0);
    rc.Sbar = scal(0.0);
    rc.R = scal(1.0);
    rc.Rbar = scal(0.0);
    spec.regimes.push_back(rc);
  }
  const int m0 = 2;
  spec.b = model::InhomogeneityProcess::zero(1, m0);
  spec.sigma = model::InhomogeneityProcess::zero(1, m0);
  spec.q = model::InhomogeneityProcess::zero(1, m0);
  spec.qbar = model::InhomogeneityProcess::zero(1, m0);
  spec.r = model::InhomogeneityProcess::zero(1, m0);
  spec.rbar = model::InhomogeneityProcess::zero(1, m0);
  return spec;
}

/// Noisy variant with the same fluctuation-flow matrix (2 A + C^2 unchanged
/// per regime) but a unit state-to-diffusion loading, so the mean component
/// feeds the fluctuation moments: exercises the cross-coupling block.
inline model::ProblemSpec make_switching_scalar_noisy() {
  model::ProblemSpec spec = make_switching_scalar();
  spec.regimes[0].A = scal(0.5);
  spec.regimes[1].A = scal(-1.5);
  spec.regimes[0].C = scal(1.0);
  spec.regimes[1].C = scal(1.0);
  return spec;
}

/// Single-regime scalar control problem whose stationary solution is known
/// in closed form: P = sqrt(2) - 1, gain -P, and the finite-horizon value
/// P(tau) = (p+ - p- phi) / (1 - phi), phi = -(3 - 2 sqrt(2)) e^{-2 sqrt(2) tau},
/// p+- = -1 +- sqrt(2).
inline model::ProblemSpec make_scalar_control() {
  model::ProblemSpec spec;
  spec.n = 1;
  spec.m = 1;
  spec.gen = chain::validate_generator(Mat::Zero(1, 1));
  model::RegimeCoefficients rc;
  rc.A = scal(-1.0);
  rc.Abar = scal(0.0);
  rc.B = scal(1.0);
  rc.Bbar = scal(0.0);
  rc.C = scal(0.0);
  rc.Cbar = scal(0.0);
  rc.D = scal(0.0);
  rc.Dbar = scal(0.0);
  rc.Q = scal(1.0);
  rc.Qbar = scal(0.0);
  rc.S = scal(0.0);
  rc.Sbar = scal(0.0);
  rc.R = scal(1.0);
  rc.Rbar = scal(0.0);
  spec.regimes.push_back(rc);
  spec.b = model::InhomogeneityProcess::zero(1, 1);
  spec.sigma = model::InhomogeneityProcess::zero(1, 1);
  spec.q = model::InhomogeneityProcess::zero(1, 1);
  spec.qbar = model::InhomogeneityProcess::zero(1, 1);
  spec.r = model::InhomogeneityProcess::zero(1, 1);
  spec.rbar = model::InhomogeneityProcess::zero(1, 1);
  return spec;
}

/// Scalar uncontrolled problem (A = -1, B = D = 0, Q = R = 1) with a constant
/// unit linear state cost on [0, 1]. The stationary blocks are P = 1/2 with
/// zero gain, and the deterministic adjoint is y2(t) = 1 - e^{-(1 - t)}.
inline model::ProblemSpec make_scalar_adjoint() {
  model::ProblemSpec spec = make_scalar_control();
  spec.regimes[0].B = scal(0.0);
  spec.q = make_process(1.0, {0.0, 1.0}, {row2(1.0, 1.0)});
  return spec;
}

/// The frozen two-regime, two-dimensional working instance (mean-field
/// couplings, full cross weights, and compactly supported affine inputs on
/// [0, 1]); matches configs/twostate.json byte for byte.
inline model::ProblemSpec make_twostate(bool with_inputs = true) {
  model::ProblemSpec spec;
  spec.n = 2;
  spec.m = 1;
  Mat lambda(2, 2);
  lambda << -3.0, 3.0, 2.0, -2.0;
  spec.gen = chain::validate_generator(lambda);

  model::RegimeCoefficients r0;
  r0.A = mat2(-1.0, 0.5, -0.3, -1.2);
  r0.Abar = mat2(0.2, -0.1, 0.1, 0.15);
  r0.B = col2(0.8, 0.3);
  r0.Bbar = col2(0.1, -0.2);
  r0.C = mat2(0.3, -0.1, 0.2, 0.25);
  r0.Cbar = mat2(-0.15, 0.05, 0.1, -0.1);
  r0.D = col2(0.25, -0.1);
  r0.Dbar = col2(0.1, 0.05);
  r0.Q = mat2(1.5, 0.2, 0.2, 1.1);
  r0.Qbar = mat2(0.2, 0.0, 0.0, -0.1);
  r0.S = row2(0.15, -0.1);
  r0.Sbar = row2(-0.05, 0.08);
  r0.R = scal(1.0);
  r0.Rbar = scal(0.2);
  spec.regimes.push_back(r0);

  model::RegimeCoefficients r1;
  r1.A = mat2(-0.8, -0.4, 0.5, -1.5);
  r1.Abar = mat2(-0.1, 0.2, 0.05, 0.1);
  r1.B = col2(0.4, 0.9);
  r1.Bbar = col2(-0.15, 0.1);
  r1.C = mat2(0.2, 0.1, -0.15, 0.3);
  r1.Cbar = mat2(0.1, -0.05, 0.05, 0.12);
  r1.D = col2(-0.2, 0.15);
  r1.Dbar = col2(0.05, -0.1);
  r1.Q = mat2(1.2, -0.15, -0.15, 1.4);
  r1.Qbar = mat2(0.1, 0.05, 0.05, 0.2);
  r1.S = row2(-0.1, 0.12);
  r1.Sbar = row2(0.06, -0.04);
  r1.R = scal(1.1);
  r1.Rbar = scal(-0.1);
  spec.regimes.push_back(r1);

  const int m0 = 2;
  if (!with_inputs) {
    spec.b = model::InhomogeneityProcess::zero(2, m0);
    spec.sigma = model::InhomogeneityProcess::zero(2, m0);
    spec.q = model::InhomogeneityProcess::zero(2, m0);
    spec.qbar = model::InhomogeneityProcess::zero(2, m0);
    spec.r = model::InhomogeneityProcess::zero(1, m0);
    spec.rbar = model::InhomogeneityProcess::zero(1, m0);
    return spec;
  }

  auto table = [](double a0, double a1, double a2, double b0, double b1, double b2) {
    Mat m(2, 3);
    m << a0, a1, a2, b0, b1, b2;
    return m;
  };
  auto table2 = [](double a0, double a1, double b0, double b1) {
    Mat m(2, 2);
    m << a0, a1, b0, b1;
    return m;
  };

  spec.b = make_process(
      1.0, {0.0, 0.4, 1.0},
      {table(0.3, 0.1, 0.0, -0.2, 0.0, 0.0), table(-0.2, 0.15, 0.0, 0.1, -0.05, 0.0)},
      {table(0.1, 0.0, 0.0, 0.05, 0.02, 0.0), table(0.05, 0.02, 0.0, -0.05, 0.0, 0.0)});
  spec.sigma = make_process(
      1.0, {0.0, 0.5, 1.0},
      {table(0.2, 0.05, 0.0, 0.1, -0.05, 0.0), table(-0.1, 0.1, 0.0, 0.15, 0.0, 0.0)},
      {table(0.15, 0.05, 0.0, -0.1, 0.05, 0.0), table(0.1, -0.02, 0.0, 0.08, 0.03, 0.0)});
  spec.q = make_process(1.0, {0.0, 1.0},
                        {table2(0.2, 0.0, -0.1, 0.0), table2(-0.15, 0.0, 0.05, 0.0)},
                        {table2(0.1, 0.0, 0.0, 0.0), table2(0.0, 0.0, 0.08, 0.0)});
  spec.qbar = make_process(
      1.0, {0.0, 0.7, 1.0},
      {table(0.1, 0.0, 0.0, 0.05, -0.05, 0.0), table(-0.05, 0.02, 0.0, 0.1, 0.0, 0.0)});
  spec.r = make_process(1.0, {0.0, 1.0}, {row2(0.15, 0.0), row2(-0.1, 0.0)},
                        {row2(0.05, 0.0), row2(0.02, 0.0)});
  spec.rbar = make_process(1.0, {0.0, 1.0}, {row2(-0.05, 0.0), row2(0.03, 0.0)});
  return spec;
}

/// Randomized two-regime instance (n = 2, m = 1) with an open-loop
/// mean-square stable fluctuation flow (spectral abscissa < -0.3) and
/// comfortable weight margins. Rejection-samples until the filter passes.
inline model::ProblemSpec random_stable_instance(std::uint64_t seed) {
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 1);
  auto u = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

  for (int attempt = 0; attempt < 200; ++attempt) {
    model::ProblemSpec spec;
    spec.n = 2;
    spec.m = 1;
    Mat lambda(2, 2);
    const double r01 = u(0.5, 2.5);
    const double r10 = u(0.5, 2.5);
    lambda << -r01, r01, r10, -r10;
    spec.gen = chain::validate_generator(lambda);

    for (int reg = 0; reg < 2; ++reg) {
      model::RegimeCoefficients rc;
      Mat g(2, 2);
      g << u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0);
      rc.A = g - (1.2 + g.norm()) * Mat::Identity(2, 2);
      rc.Abar = 0.2 * mat2(u(-1, 1), u(-1, 1), u(-1, 1), u(-1, 1));
      rc.B = col2(u(-1, 1), u(-1, 1));
      rc.Bbar = 0.2 * col2(u(-1, 1), u(-1, 1));
      rc.C = mat2(u(-0.3, 0.3), u(-0.3, 0.3), u(-0.3, 0.3), u(-0.3, 0.3));
      rc.Cbar = 0.15 * mat2(u(-1, 1), u(-1, 1), u(-1, 1), u(-1, 1));
      rc.D = col2(u(-0.3, 0.3), u(-0.3, 0.3));
      rc.Dbar = 0.15 * col2(u(-1, 1), u(-1, 1));
      Mat v = mat2(u(-1, 1), u(-1, 1), u(-1, 1), u(-1, 1));
      rc.Q = Mat::Identity(2, 2) + 0.3 * (v * v.transpose());
      rc.Qbar = 0.1 * (v.transpose() * v);
      rc.S = 0.1 * row2(u(-1, 1), u(-1, 1));
      rc.Sbar = 0.05 * row2(u(-1, 1), u(-1, 1));
      rc.R = scal(1.0 + u(0.0, 1.0));
      rc.Rbar = scal(0.1 * u(-1.0, 1.0));
      spec.regimes.push_back(rc);
    }
    spec.b = model::InhomogeneityProcess::zero(2, 2);
    spec.sigma = model::InhomogeneityProcess::zero(2, 2);
    spec.q = model::InhomogeneityProcess::zero(2, 2);
    spec.qbar = model::InhomogeneityProcess::zero(2, 2);
    spec.r = model::InhomogeneityProcess::zero(1, 2);
    spec.rbar = model::InhomogeneityProcess::zero(1, 2);

    if (!model::validate(spec).ok()) continue;
    const model::DecomposedModel dm = model::decompose(spec);
    const stability::Gains zero = stability::Gains::zero(2, 1, 2);
    const double abscissa =
        stability::spectral_abscissa(stability::second_moment_generator(dm, zero));
    if (abscissa < -0.3) return spec;
  }
  throw std::runtime_error("instance sampler failed to find a stable draw");
}

}  // namespace switchlq::testing
