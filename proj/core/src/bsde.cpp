#include "switchlq/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace switchlq::bsde {

namespace {

/// Linear interpolation into a per-regime table on an ascending grid; zero
/// beyond the support end.
void sample_grid(const std::vector<double>& grid, const Mat& table, double support_end,
                 double time, Vec& out) {
  if (grid.empty() || time > support_end) {
    out.setZero();
    return;
  }
  if (time <= grid.front()) {
    out = table.col(0);
    return;
  }
  if (time >= grid.back()) {
    out = table.col(table.cols() - 1);
    return;
  }
  const auto it = std::upper_bound(grid.begin(), grid.end(), time);
  const int hi = static_cast<int>(it - grid.begin());
  const int lo = hi - 1;
  const double w = (time - grid[lo]) / (grid[hi] - grid[lo]);
  out = (1.0 - w) * table.col(lo) + w * table.col(hi);
}

struct SourceTerm {
  const model::InhomogeneityProcess* proc;
  bool wiener_part;  // sample h (true) or g (false)
};

void collect_support(const std::vector<SourceTerm>& sources, std::set<double>& points,
                     double& t_end) {
  for (const SourceTerm& src : sources) {
    const auto& p = *src.proc;
    if (p.is_zero()) continue;
    const auto& tables = src.wiener_part ? p.h : p.g;
    bool any = false;
    for (const Mat& m : tables) {
      if (m.size() > 0 && m.cwiseAbs().maxCoeff() != 0.0) {
        any = true;
        break;
      }
    }
    if (!any) continue;
    points.insert(p.breakpoints.begin(), p.breakpoints.end());
    points.insert(p.T_in);
    t_end = std::max(t_end, p.T_in);
  }
}

}  // namespace

Drivers assemble_drivers(const model::DecomposedModel& dm, const PerRegime<Mat>& P1,
                         const PerRegime<Mat>& P2, const stability::Gains& gains) {
  const int m0 = dm.num_regimes();
  const int n = dm.n;
  if (static_cast<int>(P1.size()) != m0 || static_cast<int>(P2.size()) != m0 ||
      static_cast<int>(gains.theta1.size()) != m0 || static_cast<int>(gains.theta2.size()) != m0) {
    throw ConfigError(ErrorCode::DimensionMismatch, "driver assembly needs per-regime P and gains");
  }

  Drivers drv;
  for (int k = 1; k <= 2; ++k) {
    const bool wiener = (k == 1);
    const std::vector<SourceTerm> sources = {
        {wiener ? &dm.b1 : &dm.b2, wiener},
        {wiener ? &dm.sigma1 : &dm.sigma2, wiener},
        {wiener ? &dm.q1 : &dm.q2, wiener},
        {wiener ? &dm.r1 : &dm.r2, wiener},
    };
    std::set<double> points;
    double t_end = 0.0;
    collect_support(sources, points, t_end);
    model::InhomogeneityProcess& f = (k == 1) ? drv.f1 : drv.f2;
    if (points.empty()) {
      f = model::InhomogeneityProcess::zero(n, m0);
      continue;
    }
    f.T_in = t_end;
    f.breakpoints.assign(points.begin(), points.end());
    const int nbp = static_cast<int>(f.breakpoints.size());
    f.g.assign(static_cast<std::size_t>(m0), Mat::Zero(n, nbp));
    f.h.assign(static_cast<std::size_t>(m0), Mat::Zero(n, nbp));
    Vec vb(n), vs(n), vq(n), vr(dm.m);
    for (int i = 0; i < m0; ++i) {
      const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(i)];
      const Mat& theta = wiener ? gains.theta1[static_cast<std::size_t>(i)]
                                : gains.theta2[static_cast<std::size_t>(i)];
      const Mat closed_c = (wiener ? dr.C1 + dr.D1 * theta : dr.C2 + dr.D2 * theta);
      const Mat& Pk = wiener ? P1[static_cast<std::size_t>(i)] : P2[static_cast<std::size_t>(i)];
      const Mat& P1i = P1[static_cast<std::size_t>(i)];
      for (int c = 0; c < nbp; ++c) {
        const double t = f.breakpoints[c];
        if (wiener) {
          dm.b1.h_at(t, i, vb);
          dm.sigma1.h_at(t, i, vs);
          dm.q1.h_at(t, i, vq);
          dm.r1.h_at(t, i, vr);
        } else {
          dm.b2.g_at(t, i, vb);
          dm.sigma2.g_at(t, i, vs);
          dm.q2.g_at(t, i, vq);
          dm.r2.g_at(t, i, vr);
        }
        f.g[static_cast<std::size_t>(i)].col(c) =
            Pk * vb + closed_c.transpose() * (P1i * vs) + vq + theta.transpose() * vr;
      }
    }
  }
  return drv;
}

namespace {

/// Ascending node list covering [0, t_end], refined from the segment
/// boundaries so every segment gets an integer number of uniform steps.
std::vector<double> build_nodes(const std::set<double>& boundaries, double t_end, double step) {
  std::vector<double> segs;
  segs.push_back(0.0);
  for (double b : boundaries) {
    if (b > 1e-14 && b < t_end - 1e-14) segs.push_back(b);
  }
  segs.push_back(t_end);
  std::vector<double> nodes;
  nodes.push_back(0.0);
  for (std::size_t k = 0; k + 1 < segs.size(); ++k) {
    const double a = segs[k];
    const double b = segs[k + 1];
    const int sub = std::max(1, static_cast<int>(std::ceil((b - a) / step - 1e-12)));
    for (int i = 1; i <= sub; ++i) {
      nodes.push_back(i == sub ? b : a + (b - a) * (static_cast<double>(i) / sub));
    }
  }
  return nodes;
}

std::vector<double> refine_nodes(const std::vector<double>& nodes) {
  std::vector<double> fine;
  fine.reserve(2 * nodes.size());
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    fine.push_back(nodes[i]);
    fine.push_back(0.5 * (nodes[i] + nodes[i + 1]));
  }
  fine.push_back(nodes.back());
  return fine;
}

struct AdjointProblem {
  const model::DecomposedModel* dm;
  PerRegime<Mat> at1, at2;  // closed-loop A_k^theta transposed, per regime
  PerRegime<Mat> ct2;       // closed-loop C_2^theta transposed, per regime
  const Drivers* drivers;

  // Backward right-hand side: minus d/dt of the stacked [w1; y2] profile.
  void eval(double t, const Mat& w1, const Mat& y2, Mat& dw1, Mat& dy2, Vec& scratch) const {
    const int m0 = dm->num_regimes();
    const Mat& lambda = dm->gen.lambda;
    for (int i = 0; i < m0; ++i) {
      dw1.col(i).noalias() = at1[static_cast<std::size_t>(i)] * w1.col(i);
      dy2.col(i).noalias() = at2[static_cast<std::size_t>(i)] * y2.col(i);
      dy2.col(i).noalias() += ct2[static_cast<std::size_t>(i)] * w1.col(i);
      for (int j = 0; j < m0; ++j) {
        const double rate = lambda(i, j);
        if (rate != 0.0) {
          dw1.col(i) += rate * w1.col(j);
          dy2.col(i) += rate * y2.col(j);
        }
      }
      drivers->f1.g_at(t, i, scratch);
      dw1.col(i) += scratch;
      drivers->f2.g_at(t, i, scratch);
      dy2.col(i) += scratch;
    }
  }
};

/// Solves the backward system on the given ascending node list (terminal
/// value zero at the last node) with RK4 marching toward t = 0.
void integrate_backward(const AdjointProblem& prob, const std::vector<double>& nodes,
                        PerRegime<Mat>& w1_out, PerRegime<Mat>& y2_out) {
  const int m0 = prob.dm->num_regimes();
  const int n = prob.dm->n;
  const int nt = static_cast<int>(nodes.size());
  w1_out.assign(static_cast<std::size_t>(m0), Mat::Zero(n, nt));
  y2_out.assign(static_cast<std::size_t>(m0), Mat::Zero(n, nt));

  Mat w1 = Mat::Zero(n, m0), y2 = Mat::Zero(n, m0);
  Mat k1w(n, m0), k1y(n, m0), k2w(n, m0), k2y(n, m0), k3w(n, m0), k3y(n, m0), k4w(n, m0),
      k4y(n, m0), tw(n, m0), ty(n, m0);
  Vec scratch(n);

  for (int idx = nt - 2; idx >= 0; --idx) {
    const double t_hi = nodes[static_cast<std::size_t>(idx + 1)];
    const double t_lo = nodes[static_cast<std::size_t>(idx)];
    const double h = t_hi - t_lo;
    // March in remaining time; stages run from t_hi down to t_lo.
    prob.eval(t_hi, w1, y2, k1w, k1y, scratch);
    tw = w1 + 0.5 * h * k1w;
    ty = y2 + 0.5 * h * k1y;
    prob.eval(t_hi - 0.5 * h, tw, ty, k2w, k2y, scratch);
    tw = w1 + 0.5 * h * k2w;
    ty = y2 + 0.5 * h * k2y;
    prob.eval(t_hi - 0.5 * h, tw, ty, k3w, k3y, scratch);
    tw = w1 + h * k3w;
    ty = y2 + h * k3y;
    prob.eval(t_lo, tw, ty, k4w, k4y, scratch);
    w1 += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    y2 += (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    if (!w1.allFinite() || !y2.allFinite()) {
      throw SolverError(ErrorCode::StepRejected, "adjoint integration produced non-finite values");
    }
    for (int i = 0; i < m0; ++i) {
      w1_out[static_cast<std::size_t>(i)].col(idx) = w1.col(i);
      y2_out[static_cast<std::size_t>(i)].col(idx) = y2.col(i);
    }
  }
}

}  // namespace

Vec AdjointSolution::y2_at(double time, int regime) const {
  Vec out = Vec::Zero(y2.empty() ? 0 : y2[0].rows());
  y2_at(time, regime, out);
  return out;
}

Vec AdjointSolution::w1_at(double time, int regime) const {
  Vec out = Vec::Zero(w1.empty() ? 0 : w1[0].rows());
  w1_at(time, regime, out);
  return out;
}

void AdjointSolution::y2_at(double time, int regime, Vec& out) const {
  if (y2.empty()) {
    out.setZero();
    return;
  }
  sample_grid(t, y2[static_cast<std::size_t>(regime)], T_in, time, out);
}

void AdjointSolution::w1_at(double time, int regime, Vec& out) const {
  if (w1.empty()) {
    out.setZero();
    return;
  }
  sample_grid(t, w1[static_cast<std::size_t>(regime)], T_in, time, out);
}

AdjointSolution solve_adjoint(const model::DecomposedModel& dm, const riccati::AreSolution& are,
                              const Drivers& drivers, double step, double grid_check_tol) {
  if (step <= 0.0) {
    throw ConfigError(ErrorCode::BadArgument, "adjoint step must be positive");
  }
  const int m0 = dm.num_regimes();
  AdjointSolution sol;
  double t_end = 0.0;
  std::set<double> boundaries;
  for (const model::InhomogeneityProcess* f : {&drivers.f1, &drivers.f2}) {
    if (f->is_zero()) continue;
    t_end = std::max(t_end, f->T_in);
    boundaries.insert(f->breakpoints.begin(), f->breakpoints.end());
  }
  if (t_end <= 0.0) {
    sol.T_in = 0.0;
    sol.y2.assign(static_cast<std::size_t>(m0), Mat::Zero(dm.n, 0));
    sol.w1.assign(static_cast<std::size_t>(m0), Mat::Zero(dm.n, 0));
    return sol;
  }

  AdjointProblem prob;
  prob.dm = &dm;
  prob.drivers = &drivers;
  prob.at1.reserve(static_cast<std::size_t>(m0));
  prob.at2.reserve(static_cast<std::size_t>(m0));
  prob.ct2.reserve(static_cast<std::size_t>(m0));
  for (int i = 0; i < m0; ++i) {
    const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(i)];
    const Mat& th1 = are.gains.theta1[static_cast<std::size_t>(i)];
    const Mat& th2 = are.gains.theta2[static_cast<std::size_t>(i)];
    prob.at1.push_back((dr.A1 + dr.B1 * th1).transpose());
    prob.at2.push_back((dr.A2 + dr.B2 * th2).transpose());
    prob.ct2.push_back((dr.C2 + dr.D2 * th2).transpose());
  }

  const std::vector<double> coarse = build_nodes(boundaries, t_end, step);
  const std::vector<double> fine = refine_nodes(coarse);
  PerRegime<Mat> w1_coarse, y2_coarse, w1_fine, y2_fine;
  integrate_backward(prob, coarse, w1_coarse, y2_coarse);
  integrate_backward(prob, fine, w1_fine, y2_fine);

  double disagreement = 0.0;
  for (int i = 0; i < m0; ++i) {
    for (std::size_t c = 0; c < coarse.size(); ++c) {
      disagreement = std::max(
          disagreement, (w1_coarse[static_cast<std::size_t>(i)].col(static_cast<int>(c)) -
                         w1_fine[static_cast<std::size_t>(i)].col(static_cast<int>(2 * c)))
                            .cwiseAbs()
                            .maxCoeff());
      disagreement = std::max(
          disagreement, (y2_coarse[static_cast<std::size_t>(i)].col(static_cast<int>(c)) -
                         y2_fine[static_cast<std::size_t>(i)].col(static_cast<int>(2 * c)))
                            .cwiseAbs()
                            .maxCoeff());
    }
  }
  if (disagreement > grid_check_tol) {
    throw SolverError(ErrorCode::GridTooCoarse,
                      "adjoint grid-halving disagreement " + std::to_string(disagreement) +
                          " exceeds " + std::to_string(grid_check_tol));
  }

  sol.T_in = t_end;
  sol.t = fine;
  sol.w1 = std::move(w1_fine);
  sol.y2 = std::move(y2_fine);
  return sol;
}

Vec OffsetControls::v2_at(double time, int regime) const {
  Vec out = Vec::Zero(v2.empty() ? 0 : v2[0].rows());
  v2_at(time, regime, out);
  return out;
}

Vec OffsetControls::v1_coef_at(double time, int regime) const {
  Vec out = Vec::Zero(v1_coef.empty() ? 0 : v1_coef[0].rows());
  v1_coef_at(time, regime, out);
  return out;
}

void OffsetControls::v2_at(double time, int regime, Vec& out) const {
  if (v2.empty()) {
    out.setZero();
    return;
  }
  sample_grid(t, v2[static_cast<std::size_t>(regime)], T_in, time, out);
}

void OffsetControls::v1_coef_at(double time, int regime, Vec& out) const {
  if (v1_coef.empty()) {
    out.setZero();
    return;
  }
  sample_grid(t, v1_coef[static_cast<std::size_t>(regime)], T_in, time, out);
}

OffsetControls OffsetControls::zero(int m, int num_regimes) {
  OffsetControls oc;
  oc.T_in = 0.0;
  oc.v2.assign(static_cast<std::size_t>(num_regimes), Mat::Zero(m, 0));
  oc.v1_coef.assign(static_cast<std::size_t>(num_regimes), Mat::Zero(m, 0));
  return oc;
}

OffsetControls compute_offsets(const model::DecomposedModel& dm, const riccati::AreSolution& are,
                               const AdjointSolution& adjoint) {
  const int m0 = dm.num_regimes();
  const int n = dm.n;
  const int m = dm.m;

  std::set<double> points(adjoint.t.begin(), adjoint.t.end());
  double t_end = adjoint.T_in;
  std::vector<SourceTerm> direct = {{&dm.sigma2, false}, {&dm.r2, false},
                                    {&dm.sigma1, true}, {&dm.r1, true}};
  collect_support(direct, points, t_end);
  if (points.empty() || t_end <= 0.0) return OffsetControls::zero(m, m0);

  OffsetControls oc;
  oc.T_in = t_end;
  oc.t.assign(points.begin(), points.end());
  const int nt = static_cast<int>(oc.t.size());
  oc.v2.assign(static_cast<std::size_t>(m0), Mat::Zero(m, nt));
  oc.v1_coef.assign(static_cast<std::size_t>(m0), Mat::Zero(m, nt));

  Vec y2(n), w1(n), gs(n), hs(n), gr(m), hr(m);
  for (int i = 0; i < m0; ++i) {
    const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(i)];
    const Mat& P1i = are.P1[static_cast<std::size_t>(i)];
    const Eigen::LLT<Mat> r1_eff((dr.R1 + dr.D1.transpose() * P1i * dr.D1).eval());
    const Eigen::LLT<Mat> r2_eff((dr.R2 + dr.D2.transpose() * P1i * dr.D2).eval());
    if (r1_eff.info() != Eigen::Success || r2_eff.info() != Eigen::Success) {
      throw SolverError(ErrorCode::GainSingular,
                        "effective control weight is not positive definite at regime " +
                            std::to_string(i));
    }
    for (int c = 0; c < nt; ++c) {
      const double t = oc.t[static_cast<std::size_t>(c)];
      adjoint.y2_at(t, i, y2);
      adjoint.w1_at(t, i, w1);
      dm.sigma2.g_at(t, i, gs);
      dm.sigma1.h_at(t, i, hs);
      dm.r2.g_at(t, i, gr);
      dm.r1.h_at(t, i, hr);
      oc.v2[static_cast<std::size_t>(i)].col(c) =
          -r2_eff.solve((dr.B2.transpose() * y2 + dr.D2.transpose() * w1 +
                         dr.D2.transpose() * (P1i * gs) + gr)
                            .eval());
      oc.v1_coef[static_cast<std::size_t>(i)].col(c) =
          -r1_eff.solve(
              (dr.B1.transpose() * w1 + dr.D1.transpose() * (P1i * hs) + hr).eval());
    }
  }
  return oc;
}

const char* to_string(ValueConvention convention) {
  return convention == ValueConvention::Derivation ? "derivation" : "alternate-box";
}

double optimal_value(const model::DecomposedModel& dm, const riccati::AreSolution& are,
                     const AdjointSolution& adjoint, double s, int regime, const Vec& xi1_coef,
                     const Vec& xi2, ValueConvention convention) {
  const int m0 = dm.num_regimes();
  const int n = dm.n;
  if (regime < 0 || regime >= m0) {
    throw ConfigError(ErrorCode::BadArgument, "initial regime out of range");
  }
  if (s < 0.0) {
    throw ConfigError(ErrorCode::BadArgument, "initial time must be >= 0");
  }
  if (xi2.size() != n || xi1_coef.size() != n) {
    throw ConfigError(ErrorCode::DimensionMismatch, "initial data must have dimension n");
  }

  const Mat& P1s = are.P1[static_cast<std::size_t>(regime)];
  const Mat& P2s = are.P2[static_cast<std::size_t>(regime)];
  Vec y2s = adjoint.y2_at(s, regime);
  Vec w1s = adjoint.w1_at(s, regime);
  if (y2s.size() == 0) y2s = Vec::Zero(n);
  if (w1s.size() == 0) w1s = Vec::Zero(n);
  double value = 0.5 * (xi2.dot(P2s * xi2) + s * xi1_coef.dot(P1s * xi1_coef) +
                        2.0 * y2s.dot(xi2) + 2.0 * s * w1s.dot(xi1_coef));

  if (adjoint.T_in <= s || adjoint.t.empty()) return value;

  // Per-regime effective control weights (factorized once).
  std::vector<Eigen::LLT<Mat>> r1_eff, r2_eff;
  r1_eff.reserve(static_cast<std::size_t>(m0));
  r2_eff.reserve(static_cast<std::size_t>(m0));
  for (int i = 0; i < m0; ++i) {
    const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(i)];
    const Mat& P1i = are.P1[static_cast<std::size_t>(i)];
    r1_eff.emplace_back((dr.R1 + dr.D1.transpose() * P1i * dr.D1).eval());
    r2_eff.emplace_back((dr.R2 + dr.D2.transpose() * P1i * dr.D2).eval());
    if (r1_eff.back().info() != Eigen::Success || r2_eff.back().info() != Eigen::Success) {
      throw SolverError(ErrorCode::GainSingular, "effective control weight not positive definite");
    }
  }

  // Quadrature nodes: the adjoint grid clipped to [s, T_in], with s added.
  std::vector<double> nodes;
  nodes.push_back(s);
  for (double tv : adjoint.t) {
    if (tv > s + 1e-14) nodes.push_back(tv);
  }

  const double sign = (convention == ValueConvention::Derivation) ? 1.0 : -1.0;
  Vec y2(n), w1(n), gb(n), hb(n), gs(n), hs(n);
  Vec gr(dm.m), hr(dm.m), rho(dm.m);
  Mat p_trans = Mat::Identity(m0, m0);
  std::map<long long, Mat> expm_cache;

  double integral = 0.0;
  double prev_weighted = 0.0;
  for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
    const double t = nodes[idx];
    if (idx > 0) {
      const double dt = t - nodes[idx - 1];
      const long long key = llround(dt * 1e15);
      auto it = expm_cache.find(key);
      if (it == expm_cache.end()) {
        it = expm_cache.emplace(key, chain::transition_matrix(dm.gen, dt)).first;
      }
      p_trans = (p_trans * it->second).eval();
    }
    double weighted = 0.0;
    for (int j = 0; j < m0; ++j) {
      const double weight = p_trans(regime, j);
      if (weight <= 0.0) continue;
      const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(j)];
      const Mat& P1j = are.P1[static_cast<std::size_t>(j)];
      adjoint.y2_at(t, j, y2);
      adjoint.w1_at(t, j, w1);
      dm.b2.g_at(t, j, gb);
      dm.b1.h_at(t, j, hb);
      dm.sigma2.g_at(t, j, gs);
      dm.sigma1.h_at(t, j, hs);
      dm.r2.g_at(t, j, gr);
      dm.r1.h_at(t, j, hr);

      double linear = 2.0 * y2.dot(gb) + 2.0 * t * w1.dot(hb) + 2.0 * w1.dot(gs) +
                      gs.dot(P1j * gs) + t * hs.dot(P1j * hs);
      rho = dr.B2.transpose() * y2 + dr.D2.transpose() * w1 + dr.D2.transpose() * (P1j * gs) + gr;
      const double sq2 = rho.dot(r2_eff[static_cast<std::size_t>(j)].solve(rho));
      rho = dr.B1.transpose() * w1 + dr.D1.transpose() * (P1j * hs) + hr;
      const double sq1 = rho.dot(r1_eff[static_cast<std::size_t>(j)].solve(rho));
      weighted += weight * (sign * linear - sq2 - t * sq1);
    }
    if (idx > 0) integral += 0.5 * (t - nodes[idx - 1]) * (prev_weighted + weighted);
    prev_weighted = weighted;
  }
  return value + 0.5 * integral;
}

}  // namespace switchlq::bsde
