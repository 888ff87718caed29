#include "switchlq/sim.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <string>
#include <thread>

namespace switchlq::sim {

namespace {

constexpr double kBlowUp = 1e12;

void check_initial(const model::DecomposedModel& dm, const SimConfig& cfg, double horizon) {
  if (cfg.dt <= 0.0) throw ConfigError(ErrorCode::BadArgument, "step size must be positive");
  if (cfg.num_paths <= 0) throw ConfigError(ErrorCode::BadArgument, "need at least one path");
  if (cfg.init.s < 0.0) throw ConfigError(ErrorCode::BadArgument, "start time must be >= 0");
  if (!(horizon > cfg.init.s)) {
    throw ConfigError(ErrorCode::BadArgument, "horizon must exceed the start time");
  }
  if (cfg.init.regime < 0 || cfg.init.regime >= dm.num_regimes()) {
    throw ConfigError(ErrorCode::BadArgument, "initial regime out of range");
  }
  if (cfg.init.xi2.size() != dm.n || cfg.init.xi1_coef.size() != dm.n) {
    throw ConfigError(ErrorCode::DimensionMismatch, "initial data must have dimension n");
  }
  if (cfg.fixed_chain) {
    const chain::ChainPath& fc = *cfg.fixed_chain;
    if (fc.start_time > cfg.init.s + 1e-12 || fc.end_time < horizon - 1e-12) {
      throw ConfigError(ErrorCode::BadArgument, "fixed chain path does not cover the horizon");
    }
  }
}

void check_law(const model::DecomposedModel& dm, const ControlLaw& law) {
  const int m0 = dm.num_regimes();
  if (static_cast<int>(law.gains.theta1.size()) != m0 ||
      static_cast<int>(law.gains.theta2.size()) != m0) {
    throw ConfigError(ErrorCode::DimensionMismatch, "gains must cover every regime");
  }
  for (int i = 0; i < m0; ++i) {
    const Mat& t1 = law.gains.theta1[static_cast<std::size_t>(i)];
    const Mat& t2 = law.gains.theta2[static_cast<std::size_t>(i)];
    if (t1.rows() != dm.m || t1.cols() != dm.n || t2.rows() != dm.m || t2.cols() != dm.n) {
      throw ConfigError(ErrorCode::DimensionMismatch, "gain blocks must be m x n");
    }
  }
  if (!law.perturbation.is_zero() && law.perturbation.dim() != dm.m) {
    throw ConfigError(ErrorCode::DimensionMismatch, "perturbation must have dimension m");
  }
}

/// Per-path simulation engine: owns every buffer the inner loop touches, so
/// a path costs no heap traffic beyond the chain sample and grid reuse.
class Stepper {
 public:
  struct Terminal {
    Vec x1, x2;
    int regime = 0;
    double w = 0.0;
  };

  Stepper(const model::DecomposedModel& dm, std::vector<const ControlLaw*> laws,
          const SimConfig& cfg, double horizon)
      : dm_(dm),
        laws_(std::move(laws)),
        cfg_(cfg),
        horizon_(horizon),
        n_(dm.n),
        m_(dm.m),
        num_laws_(static_cast<int>(laws_.size())) {
    const int m0 = dm.num_regimes();
    a2cl_.resize(laws_.size());
    for (std::size_t l = 0; l < laws_.size(); ++l) {
      check_law(dm, *laws_[l]);
      a2cl_[l].reserve(static_cast<std::size_t>(m0));
      for (int r = 0; r < m0; ++r) {
        const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(r)];
        a2cl_[l].push_back(dr.A2 + dr.B2 * laws_[l]->gains.theta2[static_cast<std::size_t>(r)]);
      }
    }
    x1_.assign(laws_.size(), Vec::Zero(n_));
    x2_.assign(laws_.size(), Vec::Zero(n_));
    u1_.assign(laws_.size(), Vec::Zero(m_));
    u2_.assign(laws_.size(), Vec::Zero(m_));
    cost_.assign(laws_.size(), 0.0);
    lprev_.assign(laws_.size(), 0.0);
    hb_.resize(n_);
    gs_.resize(n_);
    hs_.resize(n_);
    hq1_.resize(n_);
    gq2_.resize(n_);
    hr1_.resize(m_);
    gr2_.resize(m_);
    voff_.resize(m_);
    pscr_.resize(m_);
    v2s_.resize(m_);
    drift_.resize(n_);
    diff_.resize(n_);
    k1_.resize(n_);
    k2_.resize(n_);
    k3_.resize(n_);
    k4_.resize(n_);
    xs_.resize(n_);
    gb0_.resize(n_);
    gbm_.resize(n_);
    gb1_.resize(n_);
    sn_.resize(n_);
    sm_.resize(m_);
  }

  /// Simulates path `path_index`. costs (size = #laws) receives the realized
  /// cost of each law; rec, when non-null, receives law 0's trajectory; term,
  /// when non-null, receives law 0's terminal data.
  void run(int path_index, double* costs, PathRecord* rec, Terminal* term) {
    Rng rng = Rng::for_path(cfg_.seed, static_cast<std::uint64_t>(path_index));
    const double s = cfg_.init.s;
    double w = s > 0.0 ? std::sqrt(s) * rng.normal() : 0.0;

    const chain::ChainPath* cp;
    if (cfg_.fixed_chain) {
      cp = &*cfg_.fixed_chain;
    } else {
      local_chain_ = chain::sample_path(dm_.gen, s, cfg_.init.regime, horizon_, rng);
      cp = &local_chain_;
    }
    build_grid(*cp);
    const int nt = static_cast<int>(times_.size());

    for (int l = 0; l < num_laws_; ++l) {
      x1_[static_cast<std::size_t>(l)] = w * cfg_.init.xi1_coef;
      x2_[static_cast<std::size_t>(l)] = cfg_.init.xi2;
      cost_[static_cast<std::size_t>(l)] = 0.0;
    }
    int r = regimes_[0];
    refresh_dyn(s, r);
    refresh_cost(s, r);
    for (int l = 0; l < num_laws_; ++l) {
      compute_controls(l, s, r, w);
      lprev_[static_cast<std::size_t>(l)] = loss(l, r, w);
    }
    if (rec != nullptr) {
      rec->t = times_;
      rec->regime = regimes_;
      rec->W.assign(static_cast<std::size_t>(nt), 0.0);
      rec->X1.resize(n_, nt);
      rec->X2.resize(n_, nt);
      rec->U1.resize(m_, nt);
      rec->U2.resize(m_, nt);
      record(rec, 0, w);
    }

    for (int i = 0; i + 1 < nt; ++i) {
      const double t0 = times_[static_cast<std::size_t>(i)];
      const double t1 = times_[static_cast<std::size_t>(i + 1)];
      const double delta = t1 - t0;
      const double tm = t0 + 0.5 * delta;
      r = regimes_[static_cast<std::size_t>(i)];
      const int rn = regimes_[static_cast<std::size_t>(i + 1)];
      const double dw = std::sqrt(delta) * rng.normal();
      const model::DecomposedRegime& dr = dm_.regimes[static_cast<std::size_t>(r)];

      dm_.b2.g_at(t0, r, gb0_);
      dm_.b2.g_at(tm, r, gbm_);
      dm_.b2.g_at(t1, r, gb1_);

      for (int l = 0; l < num_laws_; ++l) {
        Vec& x1 = x1_[static_cast<std::size_t>(l)];
        Vec& x2 = x2_[static_cast<std::size_t>(l)];
        const Vec& u1 = u1_[static_cast<std::size_t>(l)];
        const Vec& u2 = u2_[static_cast<std::size_t>(l)];

        drift_.noalias() = dr.A1 * x1;
        drift_.noalias() += dr.B1 * u1;
        drift_ += w * hb_;
        diff_.noalias() = dr.C1 * x1;
        diff_.noalias() += dr.C2 * x2;
        diff_.noalias() += dr.D1 * u1;
        diff_.noalias() += dr.D2 * u2;
        diff_ += gs_;
        diff_ += w * hs_;
        x1 += delta * drift_;
        x1 += dw * diff_;

        x2_rhs(l, r, t0, x2, gb0_, k1_);
        xs_ = x2 + (0.5 * delta) * k1_;
        x2_rhs(l, r, tm, xs_, gbm_, k2_);
        xs_ = x2 + (0.5 * delta) * k2_;
        x2_rhs(l, r, tm, xs_, gbm_, k3_);
        xs_ = x2 + delta * k3_;
        x2_rhs(l, r, t1, xs_, gb1_, k4_);
        x2 += (delta / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);

        if (x1.cwiseAbs().maxCoeff() > kBlowUp || x2.cwiseAbs().maxCoeff() > kBlowUp) {
          throw SolverError(ErrorCode::BlowUp, "state exceeded 1e12 on path " +
                                                   std::to_string(path_index) + " at t = " +
                                                   std::to_string(t1));
        }
        if (!x1.allFinite() || !x2.allFinite()) {
          throw SolverError(ErrorCode::BlowUp, "state became non-finite on path " +
                                                   std::to_string(path_index) + " at t = " +
                                                   std::to_string(t1));
        }
      }
      w += dw;

      if (rn == r) {
        refresh_dyn(t1, r);
        refresh_cost(t1, r);
        for (int l = 0; l < num_laws_; ++l) {
          compute_controls(l, t1, r, w);
          const double lnew = loss(l, r, w);
          cost_[static_cast<std::size_t>(l)] +=
              0.5 * delta * (lprev_[static_cast<std::size_t>(l)] + lnew);
          lprev_[static_cast<std::size_t>(l)] = lnew;
        }
      } else {
        // Left limit of the running cost at the jump (old regime), then the
        // fresh controls and integrand for the new regime.
        refresh_cost(t1, r);
        for (int l = 0; l < num_laws_; ++l) {
          compute_controls(l, t1, r, w);
          const double lright = loss(l, r, w);
          cost_[static_cast<std::size_t>(l)] +=
              0.5 * delta * (lprev_[static_cast<std::size_t>(l)] + lright);
        }
        refresh_dyn(t1, rn);
        refresh_cost(t1, rn);
        for (int l = 0; l < num_laws_; ++l) {
          compute_controls(l, t1, rn, w);
          lprev_[static_cast<std::size_t>(l)] = loss(l, rn, w);
        }
      }
      if (rec != nullptr) record(rec, i + 1, w);
    }

    for (int l = 0; l < num_laws_; ++l) costs[l] = cost_[static_cast<std::size_t>(l)];
    if (rec != nullptr) rec->cost = cost_[0];
    if (term != nullptr) {
      term->x1 = x1_[0];
      term->x2 = x2_[0];
      term->regime = regimes_.back();
      term->w = w;
    }
  }

 private:
  void build_grid(const chain::ChainPath& cp) {
    const double s = cfg_.init.s;
    uniform_.clear();
    uniform_.push_back(s);
    for (double t = s + cfg_.dt; t < horizon_ - 1e-12; t += cfg_.dt) uniform_.push_back(t);
    uniform_.push_back(horizon_);

    times_.clear();
    std::size_t j = 0;
    const std::vector<double>& jt = cp.jump_times;
    // First jump strictly inside (s, horizon).
    while (j < jt.size() && jt[j] <= s + 1e-12) ++j;
    for (std::size_t i = 0; i < uniform_.size(); ++i) {
      const double tu = uniform_[i];
      while (j < jt.size() && jt[j] < tu - 1e-12) {
        times_.push_back(jt[j]);
        ++j;
      }
      while (j < jt.size() && jt[j] <= tu + 1e-12) ++j;  // coincides with a grid node
      times_.push_back(tu);
    }

    regimes_.clear();
    regimes_.reserve(times_.size());
    std::size_t k = 0;
    int r = cp.initial_regime;
    for (double t : times_) {
      while (k < jt.size() && jt[k] <= t + 1e-12) {
        r = cp.regimes[k];
        ++k;
      }
      regimes_.push_back(r);
    }
  }

  void refresh_dyn(double t, int r) {
    dm_.b1.h_at(t, r, hb_);
    dm_.sigma2.g_at(t, r, gs_);
    dm_.sigma1.h_at(t, r, hs_);
  }

  void refresh_cost(double t, int r) {
    dm_.q1.h_at(t, r, hq1_);
    dm_.q2.g_at(t, r, gq2_);
    dm_.r1.h_at(t, r, hr1_);
    dm_.r2.g_at(t, r, gr2_);
  }

  void compute_controls(int l, double t, int r, double w) {
    const ControlLaw& law = *laws_[static_cast<std::size_t>(l)];
    Vec& u1 = u1_[static_cast<std::size_t>(l)];
    Vec& u2 = u2_[static_cast<std::size_t>(l)];
    u2.noalias() = law.gains.theta2[static_cast<std::size_t>(r)] * x2_[static_cast<std::size_t>(l)];
    law.offsets.v2_at(t, r, voff_);
    u2 += voff_;
    u1.noalias() = law.gains.theta1[static_cast<std::size_t>(r)] * x1_[static_cast<std::size_t>(l)];
    law.offsets.v1_coef_at(t, r, voff_);
    u1 += w * voff_;
    if (law.perturbation_scale != 0.0) {
      law.perturbation.g_at(t, r, pscr_);
      u2 += law.perturbation_scale * pscr_;
      law.perturbation.h_at(t, r, pscr_);
      u1 += (law.perturbation_scale * w) * pscr_;
    }
  }

  double loss(int l, int r, double w) {
    const model::DecomposedRegime& dr = dm_.regimes[static_cast<std::size_t>(r)];
    const Vec& x1 = x1_[static_cast<std::size_t>(l)];
    const Vec& x2 = x2_[static_cast<std::size_t>(l)];
    const Vec& u1 = u1_[static_cast<std::size_t>(l)];
    const Vec& u2 = u2_[static_cast<std::size_t>(l)];
    double acc = 0.0;
    sn_.noalias() = dr.Q1 * x1;
    acc += x1.dot(sn_);
    sm_.noalias() = dr.S1 * x1;
    acc += 2.0 * u1.dot(sm_);
    sm_.noalias() = dr.R1 * u1;
    acc += u1.dot(sm_);
    acc += 2.0 * w * hq1_.dot(x1);
    acc += 2.0 * w * hr1_.dot(u1);
    sn_.noalias() = dr.Q2 * x2;
    acc += x2.dot(sn_);
    sm_.noalias() = dr.S2 * x2;
    acc += 2.0 * u2.dot(sm_);
    sm_.noalias() = dr.R2 * u2;
    acc += u2.dot(sm_);
    acc += 2.0 * gq2_.dot(x2);
    acc += 2.0 * gr2_.dot(u2);
    return 0.5 * acc;
  }

  void x2_rhs(int l, int r, double t, const Vec& x, const Vec& gb, Vec& out) {
    const ControlLaw& law = *laws_[static_cast<std::size_t>(l)];
    law.offsets.v2_at(t, r, v2s_);
    if (law.perturbation_scale != 0.0) {
      law.perturbation.g_at(t, r, pscr_);
      v2s_ += law.perturbation_scale * pscr_;
    }
    out.noalias() = a2cl_[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)] * x;
    out.noalias() += dm_.regimes[static_cast<std::size_t>(r)].B2 * v2s_;
    out += gb;
  }

  void record(PathRecord* rec, int col, double w) {
    rec->W[static_cast<std::size_t>(col)] = w;
    rec->X1.col(col) = x1_[0];
    rec->X2.col(col) = x2_[0];
    rec->U1.col(col) = u1_[0];
    rec->U2.col(col) = u2_[0];
  }

  const model::DecomposedModel& dm_;
  std::vector<const ControlLaw*> laws_;
  const SimConfig& cfg_;
  double horizon_;
  int n_, m_, num_laws_;

  std::vector<PerRegime<Mat>> a2cl_;
  chain::ChainPath local_chain_;
  std::vector<double> uniform_, times_;
  std::vector<int> regimes_;
  std::vector<Vec> x1_, x2_, u1_, u2_;
  std::vector<double> cost_, lprev_;
  Vec hb_, gs_, hs_, hq1_, gq2_, hr1_, gr2_;
  Vec voff_, pscr_, v2s_;
  Vec drift_, diff_, k1_, k2_, k3_, k4_, xs_, gb0_, gbm_, gb1_, sn_, sm_;
};

double sample_se(double sum, double sumsq, int n) {
  if (n < 2) return 0.0;
  const double mean = sum / n;
  double var = (sumsq - static_cast<double>(n) * mean * mean) / (n - 1);
  if (var < 0.0) var = 0.0;
  return std::sqrt(var / n);
}

double z_score(double mean, double se) {
  if (se > 0.0) return mean / se;
  return std::abs(mean) < 1e-12 ? 0.0 : std::copysign(1e18, mean);
}

}  // namespace

ControlLaw feedback_law(const riccati::AreSolution& are, const bsde::OffsetControls& offsets) {
  ControlLaw law;
  law.gains = are.gains;
  law.offsets = offsets;
  const int m = are.gains.theta1.empty() ? 0 : static_cast<int>(are.gains.theta1[0].rows());
  law.perturbation =
      model::InhomogeneityProcess::zero(m, static_cast<int>(are.gains.theta1.size()));
  law.perturbation_scale = 0.0;
  return law;
}

ControlLaw feedback_law(const riccati::AreSolution& are) {
  const int m = are.gains.theta1.empty() ? 0 : static_cast<int>(are.gains.theta1[0].rows());
  return feedback_law(are,
                      bsde::OffsetControls::zero(m, static_cast<int>(are.gains.theta1.size())));
}

double resolve_horizon(const model::DecomposedModel& dm, const SimConfig& cfg, double epsilon) {
  if (cfg.horizon > 0.0) return cfg.horizon;
  if (epsilon <= 0.0) {
    throw ConfigError(ErrorCode::BadArgument, "horizon resolution needs a positive decay rate");
  }
  return cfg.init.s + std::max(20.0 / epsilon, 2.0 * model::input_support_end(dm));
}

void for_each_path(const model::DecomposedModel& dm, const ControlLaw& law, const SimConfig& cfg,
                   const std::function<void(int, const PathRecord&)>& visit) {
  const double horizon = cfg.horizon;
  check_initial(dm, cfg, horizon);
  Stepper stepper(dm, {&law}, cfg, horizon);
  PathRecord rec;
  double cost = 0.0;
  for (int i = 0; i < cfg.num_paths; ++i) {
    stepper.run(i, &cost, &rec, nullptr);
    visit(i, rec);
  }
}

std::vector<PathRecord> simulate_paths(const model::DecomposedModel& dm, const ControlLaw& law,
                                       const SimConfig& cfg) {
  std::vector<PathRecord> batch;
  batch.reserve(static_cast<std::size_t>(cfg.num_paths));
  for_each_path(dm, law, cfg, [&batch](int, const PathRecord& rec) { batch.push_back(rec); });
  return batch;
}

Mat crn_costs(const model::DecomposedModel& dm, const std::vector<ControlLaw>& laws,
              const SimConfig& cfg) {
  if (laws.empty()) throw ConfigError(ErrorCode::BadArgument, "need at least one law");
  const double horizon = cfg.horizon;
  check_initial(dm, cfg, horizon);
  std::vector<const ControlLaw*> ptrs;
  ptrs.reserve(laws.size());
  for (const ControlLaw& l : laws) ptrs.push_back(&l);
  Stepper stepper(dm, ptrs, cfg, horizon);
  Mat costs(cfg.num_paths, static_cast<int>(laws.size()));
  std::vector<double> row(laws.size(), 0.0);
  for (int i = 0; i < cfg.num_paths; ++i) {
    stepper.run(i, row.data(), nullptr, nullptr);
    for (std::size_t l = 0; l < laws.size(); ++l) {
      costs(i, static_cast<int>(l)) = row[l];
    }
  }
  return costs;
}

CostEstimate estimate_cost(const model::DecomposedModel& dm, const ControlLaw& law,
                           const SimConfig& cfg, const riccati::AreSolution& are) {
  const double horizon = resolve_horizon(dm, cfg, are.certificate.epsilon);
  check_initial(dm, cfg, horizon);
  check_law(dm, law);
  const int m0 = dm.num_regimes();
  const int N = cfg.num_paths;

  // Largest generalized eigenvalue of the closed-loop running-cost weight
  // against the certificate blocks, over both components and all regimes.
  double c_max = 0.0;
  for (int r = 0; r < m0; ++r) {
    const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(r)];
    for (int k = 1; k <= 2; ++k) {
      const Mat& theta = (k == 1) ? law.gains.theta1[static_cast<std::size_t>(r)]
                                  : law.gains.theta2[static_cast<std::size_t>(r)];
      const Mat& q = (k == 1) ? dr.Q1 : dr.Q2;
      const Mat& s = (k == 1) ? dr.S1 : dr.S2;
      const Mat& rr = (k == 1) ? dr.R1 : dr.R2;
      const Mat weight = q + theta.transpose() * s + s.transpose() * theta +
                         theta.transpose() * rr * theta;
      const Mat& pc = (k == 1) ? are.certificate.P1[static_cast<std::size_t>(r)]
                               : are.certificate.P2[static_cast<std::size_t>(r)];
      Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(weight, pc, Eigen::EigenvaluesOnly);
      if (ges.info() != Eigen::Success) {
        throw SolverError(ErrorCode::EigenFailure, "tail-bound eigenvalue computation failed");
      }
      c_max = std::max(c_max, ges.eigenvalues().maxCoeff());
    }
  }

  std::vector<double> costs(static_cast<std::size_t>(N), 0.0);
  std::vector<double> moments(static_cast<std::size_t>(N), 0.0);

  int threads = cfg.threads;
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  threads = std::min(threads, N);

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    try {
      Stepper stepper(dm, {&law}, cfg, horizon);
      Stepper::Terminal term;
      constexpr int kChunk = 16;
      for (;;) {
        const int begin = next.fetch_add(kChunk);
        if (begin >= N) break;
        const int end = std::min(begin + kChunk, N);
        for (int i = begin; i < end; ++i) {
          double cost = 0.0;
          stepper.run(i, &cost, nullptr, &term);
          costs[static_cast<std::size_t>(i)] = cost;
          double moment = 0.0;
          const std::size_t tr = static_cast<std::size_t>(term.regime);
          moment += term.x1.dot(are.certificate.P1[tr] * term.x1);
          moment += term.x2.dot(are.certificate.P2[tr] * term.x2);
          moments[static_cast<std::size_t>(i)] = moment;
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  double sum = 0.0, sumsq = 0.0, msum = 0.0;
  for (int i = 0; i < N; ++i) {
    sum += costs[static_cast<std::size_t>(i)];
    sumsq += costs[static_cast<std::size_t>(i)] * costs[static_cast<std::size_t>(i)];
    msum += moments[static_cast<std::size_t>(i)];
  }

  CostEstimate est;
  est.mean = sum / N;
  est.standard_error = sample_se(sum, sumsq, N);
  est.terminal_moment = msum / N;
  est.tail_bound = are.certificate.epsilon > 0.0
                       ? 0.5 * c_max * est.terminal_moment / are.certificate.epsilon
                       : 0.0;
  est.horizon = horizon;
  est.num_paths = N;
  return est;
}

StationarityReport stationarity_check(const model::DecomposedModel& dm,
                                      const riccati::AreSolution& are,
                                      const bsde::OffsetControls& offsets,
                                      const std::vector<model::InhomogeneityProcess>& directions,
                                      double epsilon, const SimConfig& cfg) {
  if (epsilon <= 0.0) {
    throw ConfigError(ErrorCode::BadArgument, "perturbation scale must be positive");
  }
  if (directions.empty()) {
    throw ConfigError(ErrorCode::BadArgument, "need at least one perturbation direction");
  }
  for (const model::InhomogeneityProcess& d : directions) {
    if (d.dim() != dm.m && !d.is_zero()) {
      throw ConfigError(ErrorCode::DimensionMismatch, "directions must have dimension m");
    }
  }

  const ControlLaw base = feedback_law(are, offsets);
  std::vector<ControlLaw> laws;
  laws.reserve(1 + 4 * directions.size());
  laws.push_back(base);
  const double scales[4] = {epsilon, -epsilon, 2.0 * epsilon, -2.0 * epsilon};
  for (const model::InhomogeneityProcess& d : directions) {
    for (double sc : scales) {
      ControlLaw law = base;
      law.perturbation = d;
      law.perturbation_scale = sc;
      laws.push_back(law);
    }
  }

  const Mat costs = crn_costs(dm, laws, cfg);
  const int N = static_cast<int>(costs.rows());

  StationarityReport report;
  report.epsilon = epsilon;
  report.num_paths = N;
  report.curvature_ok = true;
  for (std::size_t d = 0; d < directions.size(); ++d) {
    const int cp = 1 + 4 * static_cast<int>(d);
    const int cm = cp + 1;
    const int cp2 = cp + 2;
    const int cm2 = cp + 3;
    double s1 = 0.0, s1sq = 0.0, s2 = 0.0, s2sq = 0.0, cv = 0.0, cvsq = 0.0;
    for (int i = 0; i < N; ++i) {
      const double d1 = (costs(i, cp) - costs(i, cm)) / (2.0 * epsilon);
      const double d2 = (costs(i, cp2) - costs(i, cm2)) / (4.0 * epsilon);
      const double cu = (costs(i, cp) + costs(i, cm) - 2.0 * costs(i, 0)) / (epsilon * epsilon);
      s1 += d1;
      s1sq += d1 * d1;
      s2 += d2;
      s2sq += d2 * d2;
      cv += cu;
      cvsq += cu * cu;
    }
    DirectionStat stat;
    stat.deriv = s1 / N;
    stat.deriv_z = z_score(stat.deriv, sample_se(s1, s1sq, N));
    stat.deriv_wide = s2 / N;
    stat.deriv_wide_z = z_score(stat.deriv_wide, sample_se(s2, s2sq, N));
    stat.curvature = cv / N;
    stat.curvature_se = sample_se(cv, cvsq, N);
    report.max_abs_z =
        std::max({report.max_abs_z, std::abs(stat.deriv_z), std::abs(stat.deriv_wide_z)});
    if (!(stat.curvature > 0.0)) report.curvature_ok = false;
    report.directions.push_back(stat);
  }
  return report;
}

MartingaleReport martingale_check(const model::DecomposedModel& dm, const PerRegime<Mat>& P1,
                                  const PerRegime<Mat>& P2, const SimConfig& cfg,
                                  int num_buckets) {
  const double horizon = cfg.horizon;
  if (!(horizon > cfg.init.s)) {
    throw ConfigError(ErrorCode::BadArgument, "horizon must exceed the start time");
  }
  if (num_buckets < 1) throw ConfigError(ErrorCode::BadArgument, "need at least one bucket");
  if (cfg.num_paths < 2) throw ConfigError(ErrorCode::BadArgument, "need at least two paths");
  const int m0 = dm.num_regimes();
  const int n = dm.n;
  if (static_cast<int>(P1.size()) != m0 || static_cast<int>(P2.size()) != m0) {
    throw ConfigError(ErrorCode::DimensionMismatch, "P must cover every regime");
  }
  if (cfg.init.regime < 0 || cfg.init.regime >= m0) {
    throw ConfigError(ErrorCode::BadArgument, "initial regime out of range");
  }

  // Gain-cost blocks: G_k(i) = P_k A_k + A_k^T P_k + C_k^T P_1 C_k + Q_k
  //   - (B_k^T P_k + D_k^T P_1 C_k + S_k)^T (R_k + D_k^T P_1 D_k)^{-1} (...).
  // At a stationary solution this equals minus the generator mixing term, so
  // M_k below is a chain martingale.
  PerRegime<Mat> G1, G2;
  G1.reserve(static_cast<std::size_t>(m0));
  G2.reserve(static_cast<std::size_t>(m0));
  for (int i = 0; i < m0; ++i) {
    const model::DecomposedRegime& dr = dm.regimes[static_cast<std::size_t>(i)];
    const Mat& p1 = P1[static_cast<std::size_t>(i)];
    const Mat& p2 = P2[static_cast<std::size_t>(i)];
    for (int k = 1; k <= 2; ++k) {
      const Mat& pk = (k == 1) ? p1 : p2;
      const Mat& a = (k == 1) ? dr.A1 : dr.A2;
      const Mat& b = (k == 1) ? dr.B1 : dr.B2;
      const Mat& c = (k == 1) ? dr.C1 : dr.C2;
      const Mat& dmat = (k == 1) ? dr.D1 : dr.D2;
      const Mat& q = (k == 1) ? dr.Q1 : dr.Q2;
      const Mat& s = (k == 1) ? dr.S1 : dr.S2;
      const Mat& rr = (k == 1) ? dr.R1 : dr.R2;
      const Mat gain_weight = rr + dmat.transpose() * p1 * dmat;
      const Eigen::LLT<Mat> llt(gain_weight);
      if (llt.info() != Eigen::Success) {
        throw SolverError(ErrorCode::GainSingular,
                          "effective control weight is not positive definite");
      }
      const Mat smat = b.transpose() * pk + dmat.transpose() * p1 * c + s;
      Mat g = pk * a + a.transpose() * pk + c.transpose() * p1 * c + q -
              smat.transpose() * llt.solve(smat);
      g = 0.5 * (g + g.transpose()).eval();
      ((k == 1) ? G1 : G2).push_back(std::move(g));
    }
  }

  const int d = stability::sym_dim(n);
  std::vector<double> bucket_times(static_cast<std::size_t>(num_buckets), 0.0);
  for (int b = 0; b < num_buckets; ++b) {
    bucket_times[static_cast<std::size_t>(b)] =
        cfg.init.s + (horizon - cfg.init.s) * (b + 1) / num_buckets;
  }

  Mat sum1 = Mat::Zero(num_buckets, d), sumsq1 = Mat::Zero(num_buckets, d);
  Mat sum2 = Mat::Zero(num_buckets, d), sumsq2 = Mat::Zero(num_buckets, d);
  const Mat m0_1 = P1[static_cast<std::size_t>(cfg.init.regime)];
  const Mat m0_2 = P2[static_cast<std::size_t>(cfg.init.regime)];

  Mat i1 = Mat::Zero(n, n), i2 = Mat::Zero(n, n);
  for (int p = 0; p < cfg.num_paths; ++p) {
    Rng rng = Rng::for_path(cfg.seed, static_cast<std::uint64_t>(p));
    const chain::ChainPath path =
        chain::sample_path(dm.gen, cfg.init.s, cfg.init.regime, horizon, rng);
    i1.setZero();
    i2.setZero();
    double tcur = cfg.init.s;
    int r = cfg.init.regime;
    std::size_t j = 0;
    for (int b = 0; b < num_buckets; ++b) {
      const double tb = bucket_times[static_cast<std::size_t>(b)];
      while (j < path.jump_times.size() && path.jump_times[j] <= tb) {
        const double tj = path.jump_times[j];
        i1 += (tj - tcur) * G1[static_cast<std::size_t>(r)];
        i2 += (tj - tcur) * G2[static_cast<std::size_t>(r)];
        r = path.regimes[j];
        tcur = tj;
        ++j;
      }
      i1 += (tb - tcur) * G1[static_cast<std::size_t>(r)];
      i2 += (tb - tcur) * G2[static_cast<std::size_t>(r)];
      tcur = tb;
      const Vec v1 = stability::svec(P1[static_cast<std::size_t>(r)] + i1 - m0_1);
      const Vec v2 = stability::svec(P2[static_cast<std::size_t>(r)] + i2 - m0_2);
      sum1.row(b) += v1.transpose();
      sumsq1.row(b) += v1.cwiseProduct(v1).transpose();
      sum2.row(b) += v2.transpose();
      sumsq2.row(b) += v2.cwiseProduct(v2).transpose();
    }
  }

  MartingaleReport report;
  report.bucket_times = bucket_times;
  report.num_paths = cfg.num_paths;
  report.z1 = Mat::Zero(num_buckets, d);
  report.z2 = Mat::Zero(num_buckets, d);
  for (int b = 0; b < num_buckets; ++b) {
    for (int c = 0; c < d; ++c) {
      const double z1v =
          z_score(sum1(b, c) / cfg.num_paths, sample_se(sum1(b, c), sumsq1(b, c), cfg.num_paths));
      const double z2v =
          z_score(sum2(b, c) / cfg.num_paths, sample_se(sum2(b, c), sumsq2(b, c), cfg.num_paths));
      report.z1(b, c) = z1v;
      report.z2(b, c) = z2v;
      report.max_abs_z = std::max({report.max_abs_z, std::abs(z1v), std::abs(z2v)});
    }
  }
  return report;
}

MartingaleReport martingale_check(const model::DecomposedModel& dm,
                                  const riccati::AreSolution& are, const SimConfig& cfg,
                                  int num_buckets) {
  return martingale_check(dm, are.P1, are.P2, cfg, num_buckets);
}

}  // namespace switchlq::sim
