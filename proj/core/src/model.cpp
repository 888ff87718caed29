#include "switchlq/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace switchlq::model {

namespace {

constexpr double kDefinitenessMargin = 1e-10;
constexpr double kSymmetryTol = 1e-10;

bool is_symmetric(const Mat& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

double min_eigenvalue(const Mat& sym) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sym + sym.transpose()));
  if (es.info() != Eigen::Success) {
    throw SolverError(ErrorCode::EigenFailure, "symmetric eigensolve failed");
  }
  return es.eigenvalues().minCoeff();
}

// Piecewise-linear sample of one regime's table at time t (no support cutoff).
void sample_table(const std::vector<double>& bps, const Mat& table, double t, Vec& out) {
  const int nbp = static_cast<int>(bps.size());
  if (nbp == 0) {
    out.setZero();
    return;
  }
  if (t <= bps.front()) {
    out = table.col(0);
    return;
  }
  if (t >= bps.back()) {
    out = table.col(nbp - 1);
    return;
  }
  const auto it = std::upper_bound(bps.begin(), bps.end(), t);
  const int hi = static_cast<int>(it - bps.begin());
  const int lo = hi - 1;
  const double w = (t - bps[lo]) / (bps[hi] - bps[lo]);
  out = (1.0 - w) * table.col(lo) + w * table.col(hi);
}

}  // namespace

bool InhomogeneityProcess::is_zero() const {
  if (breakpoints.empty()) return true;
  for (const Mat& m : g) {
    if (m.size() > 0 && m.cwiseAbs().maxCoeff() != 0.0) return false;
  }
  for (const Mat& m : h) {
    if (m.size() > 0 && m.cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

int InhomogeneityProcess::dim() const {
  if (!g.empty()) return static_cast<int>(g[0].rows());
  if (!h.empty()) return static_cast<int>(h[0].rows());
  return 0;
}

void InhomogeneityProcess::g_at(double t, int regime, Vec& out) const {
  if (t > T_in || breakpoints.empty() || g.empty()) {
    out.setZero();
    return;
  }
  sample_table(breakpoints, g[static_cast<std::size_t>(regime)], t, out);
}

void InhomogeneityProcess::h_at(double t, int regime, Vec& out) const {
  if (t > T_in || breakpoints.empty() || h.empty()) {
    out.setZero();
    return;
  }
  sample_table(breakpoints, h[static_cast<std::size_t>(regime)], t, out);
}

Vec InhomogeneityProcess::g_at(double t, int regime) const {
  Vec out = Vec::Zero(dim());
  g_at(t, regime, out);
  return out;
}

Vec InhomogeneityProcess::h_at(double t, int regime) const {
  Vec out = Vec::Zero(dim());
  h_at(t, regime, out);
  return out;
}

InhomogeneityProcess InhomogeneityProcess::zero(int dim, int num_regimes) {
  InhomogeneityProcess proc;
  proc.T_in = 0.0;
  proc.g.assign(static_cast<std::size_t>(num_regimes), Mat::Zero(dim, 0));
  proc.h.assign(static_cast<std::size_t>(num_regimes), Mat::Zero(dim, 0));
  return proc;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i > 0) os << "; ";
    os << to_string(errors[i].code) << ": " << errors[i].message;
  }
  return os.str();
}

namespace {

void check_matrix(ValidationReport& report, const Mat& m, int rows, int cols,
                  const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << name << " must be " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
    report.errors.push_back({ErrorCode::DimensionMismatch, os.str()});
    return;
  }
  if (!m.allFinite()) {
    report.errors.push_back({ErrorCode::BadArgument, name + " has non-finite entries"});
  }
}

void check_inhomogeneity(ValidationReport& report, const InhomogeneityProcess& proc, int dim,
                         int m0, bool allow_wiener_part, const std::string& name) {
  if (proc.breakpoints.empty()) {
    if (!proc.is_zero()) {
      report.errors.push_back(
          {ErrorCode::BadArgument, name + " has values but no breakpoints"});
    }
    return;
  }
  if (proc.T_in < 0.0) {
    report.errors.push_back({ErrorCode::BadArgument, name + ".T_in must be >= 0"});
  }
  for (std::size_t i = 0; i < proc.breakpoints.size(); ++i) {
    const double t = proc.breakpoints[i];
    if (t < 0.0 || t > proc.T_in + 1e-12) {
      report.errors.push_back(
          {ErrorCode::BadArgument, name + " breakpoints must lie inside [0, T_in]"});
      break;
    }
    if (i > 0 && t <= proc.breakpoints[i - 1]) {
      report.errors.push_back(
          {ErrorCode::BadArgument, name + " breakpoints must be strictly increasing"});
      break;
    }
  }
  const int nbp = static_cast<int>(proc.breakpoints.size());
  for (const auto* part : {&proc.g, &proc.h}) {
    const bool is_g = part == &proc.g;
    if (part->empty()) continue;
    if (static_cast<int>(part->size()) != m0) {
      report.errors.push_back({ErrorCode::DimensionMismatch,
                               name + (is_g ? ".g" : ".h") + " must have one table per regime"});
      continue;
    }
    for (int i = 0; i < m0; ++i) {
      const Mat& table = (*part)[static_cast<std::size_t>(i)];
      if (table.rows() != dim || table.cols() != nbp) {
        std::ostringstream os;
        os << name << (is_g ? ".g" : ".h") << "[" << i << "] must be " << dim << "x" << nbp
           << ", got " << table.rows() << "x" << table.cols();
        report.errors.push_back({ErrorCode::DimensionMismatch, os.str()});
      } else if (!table.allFinite()) {
        report.errors.push_back({ErrorCode::BadArgument,
                                 name + (is_g ? ".g" : ".h") + " has non-finite entries"});
      }
    }
  }
  if (!allow_wiener_part) {
    for (const Mat& table : proc.h) {
      if (table.size() > 0 && table.cwiseAbs().maxCoeff() != 0.0) {
        report.errors.push_back(
            {ErrorCode::UnsupportedInput,
             name + " may not carry a Wiener-linear part (its chain-conditional mean "
                    "projection is outside the supported input class)"});
        break;
      }
    }
  }
}

}  // namespace

ValidationReport validate(const ProblemSpec& spec) {
  ValidationReport report;
  if (spec.n < 1) {
    report.errors.push_back({ErrorCode::BadArgument, "state dimension n must be >= 1"});
  }
  if (spec.m < 1) {
    report.errors.push_back({ErrorCode::BadArgument, "control dimension m must be >= 1"});
  }
  int m0 = 0;
  try {
    chain::Generator checked = chain::validate_generator(spec.gen.lambda);
    m0 = checked.num_regimes();
    for (auto& w : checked.warnings) report.warnings.push_back(w);
  } catch (const ConfigError& e) {
    report.errors.push_back({e.code(), e.what()});
  }
  if (!report.ok() || m0 == 0) return report;

  if (static_cast<int>(spec.regimes.size()) != m0) {
    std::ostringstream os;
    os << "expected " << m0 << " regime coefficient blocks, got " << spec.regimes.size();
    report.errors.push_back({ErrorCode::DimensionMismatch, os.str()});
    return report;
  }

  const int n = spec.n;
  const int m = spec.m;
  for (int i = 0; i < m0; ++i) {
    const RegimeCoefficients& rc = spec.regimes[static_cast<std::size_t>(i)];
    const std::string tag = "regime " + std::to_string(i) + ": ";
    check_matrix(report, rc.A, n, n, tag + "A");
    check_matrix(report, rc.Abar, n, n, tag + "Abar");
    check_matrix(report, rc.B, n, m, tag + "B");
    check_matrix(report, rc.Bbar, n, m, tag + "Bbar");
    check_matrix(report, rc.C, n, n, tag + "C");
    check_matrix(report, rc.Cbar, n, n, tag + "Cbar");
    check_matrix(report, rc.D, n, m, tag + "D");
    check_matrix(report, rc.Dbar, n, m, tag + "Dbar");
    check_matrix(report, rc.Q, n, n, tag + "Q");
    check_matrix(report, rc.Qbar, n, n, tag + "Qbar");
    check_matrix(report, rc.S, m, n, tag + "S");
    check_matrix(report, rc.Sbar, m, n, tag + "Sbar");
    check_matrix(report, rc.R, m, m, tag + "R");
    check_matrix(report, rc.Rbar, m, m, tag + "Rbar");
  }
  if (!report.ok()) return report;

  for (int i = 0; i < m0; ++i) {
    const RegimeCoefficients& rc = spec.regimes[static_cast<std::size_t>(i)];
    const std::string tag = "regime " + std::to_string(i) + ": ";
    for (const auto& [mat, name] : {std::pair<const Mat*, const char*>{&rc.Q, "Q"},
                                    {&rc.Qbar, "Qbar"},
                                    {&rc.R, "R"},
                                    {&rc.Rbar, "Rbar"}}) {
      if (!is_symmetric(*mat)) {
        report.errors.push_back({ErrorCode::NotSymmetric, tag + name + " is not symmetric"});
      }
    }
  }
  if (!report.ok()) return report;

  // Definiteness: for each component k, R_k > 0 and Q_k - S_k^T R_k^{-1} S_k > 0.
  for (int k = 1; k <= 2; ++k) {
    for (int i = 0; i < m0; ++i) {
      const RegimeCoefficients& rc = spec.regimes[static_cast<std::size_t>(i)];
      const Mat Qk = (k == 1) ? rc.Q : Mat(rc.Q + rc.Qbar);
      const Mat Sk = (k == 1) ? rc.S : Mat(rc.S + rc.Sbar);
      const Mat Rk = (k == 1) ? rc.R : Mat(rc.R + rc.Rbar);
      const double r_margin = min_eigenvalue(Rk);
      report.control_weight_margins.push_back(r_margin);
      std::ostringstream where;
      where << "component " << k << ", regime " << i;
      if (r_margin <= kDefinitenessMargin) {
        std::ostringstream os;
        os << where.str() << ": control weight has minimum eigenvalue " << r_margin
           << " (must exceed " << kDefinitenessMargin << ")";
        report.errors.push_back({ErrorCode::NotPositiveDefinite, os.str()});
        report.state_weight_margins.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const Mat M = Qk - Sk.transpose() * Rk.llt().solve(Sk);
      const double q_margin = min_eigenvalue(M);
      report.state_weight_margins.push_back(q_margin);
      if (q_margin <= kDefinitenessMargin) {
        std::ostringstream os;
        os << where.str() << ": state weight margin (min eig of Q - S^T R^{-1} S) is "
           << q_margin << " (must exceed " << kDefinitenessMargin << ")";
        report.errors.push_back({ErrorCode::NotPositiveDefinite, os.str()});
      }
    }
  }

  check_inhomogeneity(report, spec.b, n, m0, true, "b");
  check_inhomogeneity(report, spec.sigma, n, m0, true, "sigma");
  check_inhomogeneity(report, spec.q, n, m0, true, "q");
  check_inhomogeneity(report, spec.qbar, n, m0, false, "qbar");
  check_inhomogeneity(report, spec.r, m, m0, true, "r");
  check_inhomogeneity(report, spec.rbar, m, m0, false, "rbar");
  return report;
}

InhomogeneityProcess project(int k, const InhomogeneityProcess& proc) {
  if (k != 1 && k != 2) {
    throw ConfigError(ErrorCode::BadArgument, "component index must be 1 or 2");
  }
  InhomogeneityProcess out = proc;
  auto& drop = (k == 1) ? out.g : out.h;
  for (Mat& table : drop) table.setZero();
  return out;
}

InhomogeneityProcess merge_sum(const InhomogeneityProcess& a, const InhomogeneityProcess& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (a.dim() != b.dim() || a.g.size() != b.g.size()) {
    throw ConfigError(ErrorCode::DimensionMismatch, "cannot merge inhomogeneities of different shape");
  }
  const int dim = a.dim();
  const int m0 = static_cast<int>(a.g.size());

  std::set<double> points(a.breakpoints.begin(), a.breakpoints.end());
  points.insert(b.breakpoints.begin(), b.breakpoints.end());
  // The earlier support end is a kink of the sum.
  points.insert(std::min(a.T_in, b.T_in));

  InhomogeneityProcess out;
  out.T_in = std::max(a.T_in, b.T_in);
  out.breakpoints.assign(points.begin(), points.end());
  const int nbp = static_cast<int>(out.breakpoints.size());
  out.g.assign(static_cast<std::size_t>(m0), Mat::Zero(dim, nbp));
  out.h.assign(static_cast<std::size_t>(m0), Mat::Zero(dim, nbp));
  Vec va(dim), vb(dim);
  for (int i = 0; i < m0; ++i) {
    for (int c = 0; c < nbp; ++c) {
      const double t = out.breakpoints[c];
      a.g_at(t, i, va);
      b.g_at(t, i, vb);
      out.g[static_cast<std::size_t>(i)].col(c) = va + vb;
      a.h_at(t, i, va);
      b.h_at(t, i, vb);
      out.h[static_cast<std::size_t>(i)].col(c) = va + vb;
    }
  }
  return out;
}

DecomposedModel decompose(const ProblemSpec& spec) {
  const ValidationReport report = validate(spec);
  if (!report.ok()) {
    throw ConfigError(report.errors.front().code, "invalid problem: " + report.summary());
  }
  DecomposedModel dm;
  dm.n = spec.n;
  dm.m = spec.m;
  dm.gen = spec.gen;
  dm.regimes.reserve(spec.regimes.size());
  for (const RegimeCoefficients& rc : spec.regimes) {
    DecomposedRegime dr;
    dr.A1 = rc.A;
    dr.A2 = rc.A + rc.Abar;
    dr.B1 = rc.B;
    dr.B2 = rc.B + rc.Bbar;
    dr.C1 = rc.C;
    dr.C2 = rc.C + rc.Cbar;
    dr.D1 = rc.D;
    dr.D2 = rc.D + rc.Dbar;
    dr.Q1 = rc.Q;
    dr.Q2 = rc.Q + rc.Qbar;
    dr.S1 = rc.S;
    dr.S2 = rc.S + rc.Sbar;
    dr.R1 = rc.R;
    dr.R2 = rc.R + rc.Rbar;
    dm.regimes.push_back(std::move(dr));
  }
  dm.b1 = project(1, spec.b);
  dm.b2 = project(2, spec.b);
  dm.sigma1 = project(1, spec.sigma);
  dm.sigma2 = project(2, spec.sigma);
  dm.q1 = project(1, spec.q);
  dm.q2 = merge_sum(project(2, spec.q), project(2, spec.qbar));
  dm.r1 = project(1, spec.r);
  dm.r2 = merge_sum(project(2, spec.r), project(2, spec.rbar));
  return dm;
}

ProblemSpec recompose(const DecomposedModel& dm) {
  ProblemSpec spec;
  spec.n = dm.n;
  spec.m = dm.m;
  spec.gen = dm.gen;
  spec.regimes.reserve(dm.regimes.size());
  for (const DecomposedRegime& dr : dm.regimes) {
    RegimeCoefficients rc;
    rc.A = dr.A1;
    rc.Abar = dr.A2 - dr.A1;
    rc.B = dr.B1;
    rc.Bbar = dr.B2 - dr.B1;
    rc.C = dr.C1;
    rc.Cbar = dr.C2 - dr.C1;
    rc.D = dr.D1;
    rc.Dbar = dr.D2 - dr.D1;
    rc.Q = dr.Q1;
    rc.Qbar = dr.Q2 - dr.Q1;
    rc.S = dr.S1;
    rc.Sbar = dr.S2 - dr.S1;
    rc.R = dr.R1;
    rc.Rbar = dr.R2 - dr.R1;
    spec.regimes.push_back(std::move(rc));
  }
  // Components recombine by summation; the qbar/rbar content of the original
  // model was folded into q2/r2 by decompose, so it returns through q and r.
  spec.b = merge_sum(dm.b1, dm.b2);
  spec.sigma = merge_sum(dm.sigma1, dm.sigma2);
  spec.q = merge_sum(dm.q1, dm.q2);
  spec.qbar = InhomogeneityProcess::zero(dm.n, dm.num_regimes());
  spec.r = merge_sum(dm.r1, dm.r2);
  spec.rbar = InhomogeneityProcess::zero(dm.m, dm.num_regimes());
  return spec;
}

double input_support_end(const DecomposedModel& dm) {
  double end = 0.0;
  for (const InhomogeneityProcess* proc :
       {&dm.b1, &dm.b2, &dm.sigma1, &dm.sigma2, &dm.q1, &dm.q2, &dm.r1, &dm.r2}) {
    if (!proc->is_zero()) end = std::max(end, proc->T_in);
  }
  return end;
}

}  // namespace switchlq::model
