#include "switchlq/riccati.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace switchlq::riccati {

namespace {

constexpr double kGainFloor = 1e-10;
constexpr double kNormCap = 1e12;

struct State {
  PerRegime<Mat> P1, P2;
};

State zero_state(int n, int m0) {
  State s;
  s.P1.assign(static_cast<std::size_t>(m0), Mat::Zero(n, n));
  s.P2.assign(static_cast<std::size_t>(m0), Mat::Zero(n, n));
  return s;
}

void check_blocks(const model::DecomposedModel& dm, const PerRegime<Mat>& P1,
                  const PerRegime<Mat>& P2) {
  const int m0 = dm.num_regimes();
  if (static_cast<int>(P1.size()) != m0 || static_cast<int>(P2.size()) != m0) {
    throw ConfigError(ErrorCode::DimensionMismatch, "need one P block per component and regime");
  }
  for (const auto* family : {&P1, &P2}) {
    for (const Mat& p : *family) {
      if (p.rows() != dm.n || p.cols() != dm.n) {
        throw ConfigError(ErrorCode::DimensionMismatch, "P blocks must be n x n");
      }
    }
  }
}

double block_sup_norm(const State& a, const State& b) {
  double sup = 0.0;
  for (std::size_t i = 0; i < a.P1.size(); ++i) {
    sup = std::max(sup, (a.P1[i] - b.P1[i]).norm());
    sup = std::max(sup, (a.P2[i] - b.P2[i]).norm());
  }
  return sup;
}

double residual_sup_norm(const RiccatiRhs& rhs) {
  double sup = 0.0;
  for (const auto* family : {&rhs.F1, &rhs.F2}) {
    for (const Mat& f : *family) sup = std::max(sup, f.norm());
  }
  return sup;
}

RiccatiRhs rhs_of(const model::DecomposedModel& dm, const State& s) {
  return riccati_rhs(dm, s.P1, s.P2);
}

void check_finite(const State& s) {
  for (const auto* family : {&s.P1, &s.P2}) {
    for (const Mat& p : *family) {
      if (!p.allFinite() || p.cwiseAbs().maxCoeff() > kNormCap) {
        throw SolverError(ErrorCode::StepRejected,
                          "finite-horizon iterate left the admissible region");
      }
    }
  }
}

/// One RK4 step of dP/dtau = F(P) over step h, then re-symmetrization.
void rk4_step(const model::DecomposedModel& dm, State& s, double h) {
  const std::size_t m0 = s.P1.size();
  const RiccatiRhs k1 = rhs_of(dm, s);
  State tmp = s;
  for (std::size_t i = 0; i < m0; ++i) {
    tmp.P1[i] = s.P1[i] + 0.5 * h * k1.F1[i];
    tmp.P2[i] = s.P2[i] + 0.5 * h * k1.F2[i];
  }
  const RiccatiRhs k2 = rhs_of(dm, tmp);
  for (std::size_t i = 0; i < m0; ++i) {
    tmp.P1[i] = s.P1[i] + 0.5 * h * k2.F1[i];
    tmp.P2[i] = s.P2[i] + 0.5 * h * k2.F2[i];
  }
  const RiccatiRhs k3 = rhs_of(dm, tmp);
  for (std::size_t i = 0; i < m0; ++i) {
    tmp.P1[i] = s.P1[i] + h * k3.F1[i];
    tmp.P2[i] = s.P2[i] + h * k3.F2[i];
  }
  const RiccatiRhs k4 = rhs_of(dm, tmp);
  const double w = h / 6.0;
  for (std::size_t i = 0; i < m0; ++i) {
    s.P1[i] += w * (k1.F1[i] + 2.0 * k2.F1[i] + 2.0 * k3.F1[i] + k4.F1[i]);
    s.P2[i] += w * (k1.F2[i] + 2.0 * k2.F2[i] + 2.0 * k3.F2[i] + k4.F2[i]);
    s.P1[i] = 0.5 * (s.P1[i] + s.P1[i].transpose()).eval();
    s.P2[i] = 0.5 * (s.P2[i] + s.P2[i].transpose()).eval();
  }
  check_finite(s);
}

/// Integrates dP/dtau = F(P) from `s` over a span of length `span`.
void integrate_span(const model::DecomposedModel& dm, State& s, double span, double step) {
  if (span <= 0.0) return;
  const long full = static_cast<long>(std::floor(span / step));
  for (long k = 0; k < full; ++k) rk4_step(dm, s, step);
  const double rest = span - static_cast<double>(full) * step;
  if (rest > 1e-14 * std::max(1.0, span)) rk4_step(dm, s, rest);
}

AreSolution finalize_solution(const model::DecomposedModel& dm, const State& s, double tol,
                              const char* method) {
  AreSolution out;
  out.P1 = s.P1;
  out.P2 = s.P2;
  out.gains = synthesize_feedback(dm, s.P1, s.P2);
  out.residual_norm = residual_sup_norm(rhs_of(dm, s));
  if (out.residual_norm > 10.0 * tol) {
    throw SolverError(ErrorCode::NotStabilizable,
                      std::string(method) + " converged to residual " +
                          std::to_string(out.residual_norm) + " above the acceptance bound");
  }
  auto cert = stability::certify(dm, out.gains);
  if (!cert) {
    throw SolverError(ErrorCode::NotStabilizable,
                      std::string(method) + " produced a gain without a closed-loop certificate");
  }
  out.certificate = std::move(*cert);
  return out;
}

}  // namespace

RiccatiRhs riccati_rhs(const model::DecomposedModel& dm, const PerRegime<Mat>& P1,
                       const PerRegime<Mat>& P2) {
  check_blocks(dm, P1, P2);
  const int m0 = dm.num_regimes();

  PerRegime<Mat> P1s(P1.size()), P2s(P2.size());
  for (int i = 0; i < m0; ++i) {
    P1s[i] = 0.5 * (P1[i] + P1[i].transpose());
    P2s[i] = 0.5 * (P2[i] + P2[i].transpose());
  }

  RiccatiRhs rhs;
  rhs.F1.resize(P1.size());
  rhs.F2.resize(P2.size());
  const Mat& lambda = dm.gen.lambda;
  for (int i = 0; i < m0; ++i) {
    const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(i)];
    for (int k = 1; k <= 2; ++k) {
      const Mat& Pk = (k == 1) ? P1s[i] : P2s[i];
      const Mat& A = (k == 1) ? dr.A1 : dr.A2;
      const Mat& B = (k == 1) ? dr.B1 : dr.B2;
      const Mat& C = (k == 1) ? dr.C1 : dr.C2;
      const Mat& D = (k == 1) ? dr.D1 : dr.D2;
      const Mat& Q = (k == 1) ? dr.Q1 : dr.Q2;
      const Mat& S = (k == 1) ? dr.S1 : dr.S2;
      const Mat& R = (k == 1) ? dr.R1 : dr.R2;

      Mat mixing = Mat::Zero(dm.n, dm.n);
      const auto& family = (k == 1) ? P1s : P2s;
      for (int j = 0; j < m0; ++j) mixing += lambda(i, j) * family[j];

      const Mat gain_weight = R + D.transpose() * P1s[i] * D;
      Eigen::SelfAdjointEigenSolver<Mat> es(gain_weight);
      if (es.info() != Eigen::Success) {
        throw SolverError(ErrorCode::EigenFailure, "effective control weight eigensolve failed");
      }
      if (es.eigenvalues().minCoeff() <= kGainFloor) {
        throw SolverError(ErrorCode::GainSingular,
                          "effective control weight at regime " + std::to_string(i) +
                              ", component " + std::to_string(k) +
                              " is numerically singular (min eig " +
                              std::to_string(es.eigenvalues().minCoeff()) + ")");
      }
      const Mat Sk = B.transpose() * Pk + D.transpose() * P1s[i] * C + S;
      Mat f = mixing + Pk * A + A.transpose() * Pk + C.transpose() * P1s[i] * C + Q -
              Sk.transpose() * gain_weight.llt().solve(Sk);
      f = 0.5 * (f + f.transpose()).eval();
      ((k == 1) ? rhs.F1 : rhs.F2)[static_cast<std::size_t>(i)] = std::move(f);
    }
  }
  return rhs;
}

RiccatiTrajectory integrate_finite_horizon(const model::DecomposedModel& dm, double T,
                                           double step) {
  if (T <= 0.0 || step <= 0.0) {
    throw ConfigError(ErrorCode::BadArgument, "horizon and step must be positive");
  }
  const int m0 = dm.num_regimes();
  State s = zero_state(dm.n, m0);

  // March in remaining-time tau from the terminal condition; tau = T - t.
  std::vector<double> tau_grid;
  tau_grid.push_back(0.0);
  double tau = 0.0;
  while (tau + step < T - 1e-14 * std::max(1.0, T)) {
    tau += step;
    tau_grid.push_back(tau);
  }
  tau_grid.push_back(T);

  RiccatiTrajectory traj;
  const std::size_t num = tau_grid.size();
  traj.t.resize(num);
  traj.P1.resize(num);
  traj.P2.resize(num);
  traj.t[num - 1] = T;
  traj.P1[num - 1] = s.P1;
  traj.P2[num - 1] = s.P2;
  for (std::size_t idx = 1; idx < num; ++idx) {
    rk4_step(dm, s, tau_grid[idx] - tau_grid[idx - 1]);
    const std::size_t slot = num - 1 - idx;  // larger tau = earlier time t
    traj.t[slot] = T - tau_grid[idx];
    traj.P1[slot] = s.P1;
    traj.P2[slot] = s.P2;
  }
  traj.t[0] = 0.0;  // guard against roundoff in T - tau
  return traj;
}

AreSolution solve_are(const model::DecomposedModel& dm, double tol, double T0, double Tmax,
                      double step) {
  if (tol <= 0.0 || T0 <= 0.0 || Tmax < T0 || step <= 0.0) {
    throw ConfigError(ErrorCode::BadArgument, "solve_are parameters must be positive, Tmax >= T0");
  }
  State s = zero_state(dm.n, dm.num_regimes());
  integrate_span(dm, s, T0, step);
  double horizon = T0;
  int doublings = 0;
  while (true) {
    // By time invariance, continuing the backward flow for another `horizon`
    // turns the value at horizon T into the value at horizon 2T.
    State prev = s;
    integrate_span(dm, s, horizon, step);
    horizon *= 2.0;
    ++doublings;
    const double diff = block_sup_norm(s, prev);
    if (diff < tol) break;
    if (horizon >= Tmax) {
      throw SolverError(ErrorCode::NotStabilizable,
                        "horizon doubling reached T = " + std::to_string(horizon) +
                            " with change " + std::to_string(diff) +
                            " still above tolerance; no stationary solution found");
    }
  }
  AreSolution out = finalize_solution(dm, s, tol, "horizon doubling");
  out.final_horizon = horizon;
  out.iterations = doublings;
  return out;
}

AreSolution newton_kleinman(const model::DecomposedModel& dm, const stability::Gains& theta0,
                            double tol, int max_iterations) {
  if (tol <= 0.0 || max_iterations < 1) {
    throw ConfigError(ErrorCode::BadArgument, "newton_kleinman parameters out of range");
  }
  if (!stability::is_stabilizer(dm, theta0)) {
    throw SolverError(ErrorCode::NotStabilizing,
                      "initial feedback does not stabilize the closed loop");
  }
  const int m0 = dm.num_regimes();
  stability::Gains gains = theta0;
  State current = zero_state(dm.n, m0);
  bool have_previous = false;
  double prev_delta = std::numeric_limits<double>::infinity();
  int worsened = 0;

  for (int iter = 1; iter <= max_iterations; ++iter) {
    // Closed-loop running cost of the current gain; positive definite under
    // the standing definiteness assumptions.
    PerRegime<Mat> L1(static_cast<std::size_t>(m0)), L2(static_cast<std::size_t>(m0));
    for (int i = 0; i < m0; ++i) {
      const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(i)];
      const Mat& th1 = gains.theta1[static_cast<std::size_t>(i)];
      const Mat& th2 = gains.theta2[static_cast<std::size_t>(i)];
      L1[static_cast<std::size_t>(i)] = dr.Q1 + dr.S1.transpose() * th1 +
                                        th1.transpose() * dr.S1 +
                                        th1.transpose() * dr.R1 * th1;
      L2[static_cast<std::size_t>(i)] = dr.Q2 + dr.S2.transpose() * th2 +
                                        th2.transpose() * dr.S2 +
                                        th2.transpose() * dr.R2 * th2;
    }
    auto sol = stability::solve_coupled_lyapunov(dm, gains, L1, L2);
    if (!sol) {
      throw SolverError(ErrorCode::NotStabilizing,
                        "gain iteration lost closed-loop stability at sweep " +
                            std::to_string(iter));
    }
    State next;
    next.P1 = std::move(sol->P1);
    next.P2 = std::move(sol->P2);
    const double delta = have_previous ? block_sup_norm(next, current)
                                       : std::numeric_limits<double>::infinity();
    current = std::move(next);
    gains = synthesize_feedback(dm, current.P1, current.P2);
    if (have_previous && delta < tol) {
      AreSolution out = finalize_solution(dm, current, std::max(tol, 1e-10), "gain iteration");
      out.iterations = iter;
      return out;
    }
    if (have_previous) {
      if (delta >= prev_delta) {
        if (++worsened >= 2) {
          throw SolverError(ErrorCode::Stalled,
                            "gain iteration stopped contracting at update norm " +
                                std::to_string(delta));
        }
      } else {
        worsened = 0;
      }
      prev_delta = delta;
    }
    have_previous = true;
  }
  throw SolverError(ErrorCode::Stalled, "gain iteration exceeded the sweep limit");
}

stability::Gains synthesize_feedback(const model::DecomposedModel& dm, const PerRegime<Mat>& P1,
                                     const PerRegime<Mat>& P2) {
  check_blocks(dm, P1, P2);
  const int m0 = dm.num_regimes();
  stability::Gains gains;
  gains.theta1.resize(static_cast<std::size_t>(m0));
  gains.theta2.resize(static_cast<std::size_t>(m0));
  for (int i = 0; i < m0; ++i) {
    const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(i)];
    const Mat P1i = 0.5 * (P1[static_cast<std::size_t>(i)] +
                           P1[static_cast<std::size_t>(i)].transpose());
    const Mat P2i = 0.5 * (P2[static_cast<std::size_t>(i)] +
                           P2[static_cast<std::size_t>(i)].transpose());
    for (int k = 1; k <= 2; ++k) {
      const Mat& Pk = (k == 1) ? P1i : P2i;
      const Mat& B = (k == 1) ? dr.B1 : dr.B2;
      const Mat& C = (k == 1) ? dr.C1 : dr.C2;
      const Mat& D = (k == 1) ? dr.D1 : dr.D2;
      const Mat& S = (k == 1) ? dr.S1 : dr.S2;
      const Mat& R = (k == 1) ? dr.R1 : dr.R2;
      const Mat gain_weight = R + D.transpose() * P1i * D;
      Eigen::SelfAdjointEigenSolver<Mat> es(gain_weight);
      if (es.info() != Eigen::Success) {
        throw SolverError(ErrorCode::EigenFailure, "effective control weight eigensolve failed");
      }
      if (es.eigenvalues().minCoeff() <= kGainFloor) {
        throw SolverError(ErrorCode::GainSingular,
                          "effective control weight at regime " + std::to_string(i) +
                              ", component " + std::to_string(k) + " is numerically singular");
      }
      Mat theta = -gain_weight.llt().solve(B.transpose() * Pk + D.transpose() * P1i * C + S);
      ((k == 1) ? gains.theta1 : gains.theta2)[static_cast<std::size_t>(i)] = std::move(theta);
    }
  }
  return gains;
}

}  // namespace switchlq::riccati
