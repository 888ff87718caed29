#include "switchlq/stability.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>

namespace switchlq::stability {

namespace {

constexpr double kBoundaryTol = 1e-10;

struct ClosedLoop {
  Mat A1, A2, C1, C2;
};

ClosedLoop closed_loop(const model::DecomposedRegime& dr, const Mat& theta1, const Mat& theta2) {
  ClosedLoop cl;
  cl.A1 = dr.A1 + dr.B1 * theta1;
  cl.C1 = dr.C1 + dr.D1 * theta1;
  cl.A2 = dr.A2 + dr.B2 * theta2;
  cl.C2 = dr.C2 + dr.D2 * theta2;
  return cl;
}

void check_gains(const model::DecomposedModel& dm, const Gains& gains) {
  const int m0 = dm.num_regimes();
  if (static_cast<int>(gains.theta1.size()) != m0 ||
      static_cast<int>(gains.theta2.size()) != m0) {
    throw ConfigError(ErrorCode::DimensionMismatch, "feedback needs one gain per regime");
  }
  for (int i = 0; i < m0; ++i) {
    for (const Mat* th : {&gains.theta1[static_cast<std::size_t>(i)],
                          &gains.theta2[static_cast<std::size_t>(i)]}) {
      if (th->rows() != dm.m || th->cols() != dm.n) {
        throw ConfigError(ErrorCode::DimensionMismatch,
                          "gain at regime " + std::to_string(i) + " must be " +
                              std::to_string(dm.m) + "x" + std::to_string(dm.n));
      }
    }
  }
}

std::vector<ClosedLoop> all_closed_loops(const model::DecomposedModel& dm, const Gains& gains) {
  check_gains(dm, gains);
  std::vector<ClosedLoop> cls;
  cls.reserve(dm.regimes.size());
  for (std::size_t i = 0; i < dm.regimes.size(); ++i) {
    cls.push_back(closed_loop(dm.regimes[i], gains.theta1[i], gains.theta2[i]));
  }
  return cls;
}

}  // namespace

Gains Gains::zero(int n, int m, int num_regimes) {
  Gains g;
  g.theta1.assign(static_cast<std::size_t>(num_regimes), Mat::Zero(m, n));
  g.theta2.assign(static_cast<std::size_t>(num_regimes), Mat::Zero(m, n));
  return g;
}

int sym_dim(int n) { return n * (n + 1) / 2; }

Vec svec(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  const double sqrt2 = std::sqrt(2.0);
  Vec v(sym_dim(n));
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      v(idx++) = (i == j) ? m(i, i) : sqrt2 * 0.5 * (m(i, j) + m(j, i));
    }
  }
  return v;
}

Mat unsvec(const Vec& v, int n) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Mat m(n, n);
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      if (i == j) {
        m(i, i) = v(idx++);
      } else {
        m(i, j) = m(j, i) = inv_sqrt2 * v(idx++);
      }
    }
  }
  return m;
}

namespace {

/// Places svec(block) into rows [offset, offset + d) of column col.
void set_block(Mat& op, int offset, int col, const Mat& block) {
  const Vec coords = svec(block);
  op.block(offset, col, coords.size(), 1) = coords;
}

Mat basis_matrix(int n, int b) {
  Mat e = Mat::Zero(n, n);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      if (idx == b) {
        if (i == j) {
          e(i, i) = 1.0;
        } else {
          e(i, j) = e(j, i) = inv_sqrt2;
        }
        return e;
      }
      ++idx;
    }
  }
  throw ConfigError(ErrorCode::BadArgument, "basis index out of range");
}

}  // namespace

Mat second_moment_generator(const model::DecomposedModel& dm, const Gains& gains) {
  const auto cls = all_closed_loops(dm, gains);
  const int n = dm.n;
  const int m0 = dm.num_regimes();
  const int d = sym_dim(n);
  const int dim = 2 * m0 * d;
  const Mat& lambda = dm.gen.lambda;

  Mat op = Mat::Zero(dim, dim);
  auto index = [&](int k, int regime, int b) { return (k - 1) * m0 * d + regime * d + b; };

  for (int b = 0; b < d; ++b) {
    const Mat e = basis_matrix(n, b);
    for (int i0 = 0; i0 < m0; ++i0) {
      const ClosedLoop& cl = cls[static_cast<std::size_t>(i0)];
      {  // source: component-1 block at regime i0
        const int col = index(1, i0, b);
        const Mat local = cl.A1 * e + e * cl.A1.transpose() + cl.C1 * e * cl.C1.transpose();
        for (int i = 0; i < m0; ++i) {
          Mat img = lambda(i0, i) * e;  // regime mixing uses lambda(j, i) acting on V(j)
          if (i == i0) img += local;
          set_block(op, index(1, i, 0), col, img);
        }
      }
      {  // source: component-2 block at regime i0
        const int col = index(2, i0, b);
        const Mat local2 = cl.A2 * e + e * cl.A2.transpose();
        const Mat into1 = cl.C2 * e * cl.C2.transpose();
        for (int i = 0; i < m0; ++i) {
          Mat img = lambda(i0, i) * e;
          if (i == i0) img += local2;
          set_block(op, index(2, i, 0), col, img);
        }
        set_block(op, index(1, i0, 0), col, into1);
      }
    }
  }
  return op;
}

Mat lyapunov_operator(const model::DecomposedModel& dm, const Gains& gains) {
  return second_moment_generator(dm, gains).transpose();
}

double spectral_abscissa(const Mat& op) {
  Eigen::EigenSolver<Mat> es(op, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw SolverError(ErrorCode::EigenFailure, "eigendecomposition of flow operator failed");
  }
  return es.eigenvalues().real().maxCoeff();
}

Mat first_moment_operator(const model::DecomposedModel& dm, const Gains& gains, int k) {
  if (k != 1 && k != 2) {
    throw ConfigError(ErrorCode::BadArgument, "component index must be 1 or 2");
  }
  const auto cls = all_closed_loops(dm, gains);
  const int n = dm.n;
  const int m0 = dm.num_regimes();
  Mat op = Mat::Zero(m0 * n, m0 * n);
  for (int i = 0; i < m0; ++i) {
    const Mat& a = (k == 1) ? cls[static_cast<std::size_t>(i)].A1 : cls[static_cast<std::size_t>(i)].A2;
    op.block(i * n, i * n, n, n) = a.transpose();
    for (int j = 0; j < m0; ++j) {
      op.block(i * n, j * n, n, n) += dm.gen.lambda(i, j) * Mat::Identity(n, n);
    }
  }
  return op;
}

std::optional<CoupledLyapunovSolution> solve_coupled_lyapunov(const model::DecomposedModel& dm,
                                                              const Gains& gains,
                                                              const PerRegime<Mat>& L1,
                                                              const PerRegime<Mat>& L2) {
  const int n = dm.n;
  const int m0 = dm.num_regimes();
  const int d = sym_dim(n);
  if (static_cast<int>(L1.size()) != m0 || static_cast<int>(L2.size()) != m0) {
    throw ConfigError(ErrorCode::DimensionMismatch, "need one L block per component and regime");
  }
  for (int i = 0; i < m0; ++i) {
    for (const Mat* L : {&L1[static_cast<std::size_t>(i)], &L2[static_cast<std::size_t>(i)]}) {
      if (L->rows() != n || L->cols() != n) {
        throw ConfigError(ErrorCode::DimensionMismatch, "L blocks must be n x n");
      }
    }
  }

  const Mat op = lyapunov_operator(dm, gains);
  const double abscissa = spectral_abscissa(op);
  if (std::abs(abscissa) < kBoundaryTol) {
    throw SolverError(ErrorCode::SingularOperator,
                      "second-moment flow is numerically on the stability boundary (abscissa " +
                          std::to_string(abscissa) + ")");
  }

  Vec rhs(2 * m0 * d);
  for (int i = 0; i < m0; ++i) {
    rhs.segment(i * d, d) = -svec(L1[static_cast<std::size_t>(i)]);
    rhs.segment((m0 + i) * d, d) = -svec(L2[static_cast<std::size_t>(i)]);
  }
  const Vec x = op.partialPivLu().solve(rhs);
  if (!x.allFinite() || (op * x - rhs).cwiseAbs().maxCoeff() >
                            1e-8 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
    throw SolverError(ErrorCode::EigenFailure, "coupled Lyapunov solve did not converge");
  }

  CoupledLyapunovSolution sol;
  sol.P1.reserve(static_cast<std::size_t>(m0));
  sol.P2.reserve(static_cast<std::size_t>(m0));
  for (int i = 0; i < m0; ++i) {
    sol.P1.push_back(unsvec(x.segment(i * d, d), n));
    sol.P2.push_back(unsvec(x.segment((m0 + i) * d, d), n));
  }
  for (const auto* family : {&sol.P1, &sol.P2}) {
    for (const Mat& p : *family) {
      Eigen::SelfAdjointEigenSolver<Mat> es(p);
      if (es.info() != Eigen::Success) {
        throw SolverError(ErrorCode::EigenFailure, "eigensolve of Lyapunov solution failed");
      }
      if (es.eigenvalues().minCoeff() <= 1e-14 * std::max(1.0, p.cwiseAbs().maxCoeff())) {
        return std::nullopt;  // solution exists but is not positive definite
      }
    }
  }
  return sol;
}

std::optional<StabilityCertificate> certify(const model::DecomposedModel& dm, const Gains& gains) {
  const Mat op = second_moment_generator(dm, gains);
  const double abscissa = spectral_abscissa(op);
  if (std::abs(abscissa) < kBoundaryTol) {
    throw SolverError(ErrorCode::SingularOperator,
                      "second-moment flow is numerically on the stability boundary (abscissa " +
                          std::to_string(abscissa) + ")");
  }
  if (abscissa > 0.0) return std::nullopt;

  const PerRegime<Mat> eye(static_cast<std::size_t>(dm.num_regimes()), Mat::Identity(dm.n, dm.n));
  auto sol = solve_coupled_lyapunov(dm, gains, eye, eye);
  if (!sol) return std::nullopt;

  // Dissipation rate: largest epsilon with L >= epsilon * P, i.e. the smallest
  // generalized eigenvalue of (I, P) over all blocks.
  double epsilon = std::numeric_limits<double>::infinity();
  for (const auto* family : {&sol->P1, &sol->P2}) {
    for (const Mat& p : *family) {
      Eigen::SelfAdjointEigenSolver<Mat> es(p);
      if (es.info() != Eigen::Success) {
        throw SolverError(ErrorCode::EigenFailure, "eigensolve of certificate failed");
      }
      epsilon = std::min(epsilon, 1.0 / es.eigenvalues().maxCoeff());
    }
  }

  StabilityCertificate cert;
  cert.P1 = std::move(sol->P1);
  cert.P2 = std::move(sol->P2);
  cert.epsilon = epsilon;
  cert.abscissa = abscissa;
  return cert;
}

bool is_stabilizer(const model::DecomposedModel& dm, const Gains& gains) {
  return certify(dm, gains).has_value();
}

}  // namespace switchlq::stability
