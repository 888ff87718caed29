#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "artifacts.hpp"
#include "config_io.hpp"
#include "switchlq/bsde.hpp"
#include "switchlq/model.hpp"
#include "switchlq/riccati.hpp"
#include "switchlq/rng.hpp"
#include "switchlq/sim.hpp"
#include "switchlq/stability.hpp"
#include "switchlq/types.hpp"

namespace switchlq::cli {
namespace {

using nlohmann::json;

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  double tol = 1e-9;
  std::uint64_t seed = 1;
  int paths = 2000;
  double horizon = -1.0;
  double dt = 1e-3;
  int threads = 0;
  double max_z = 3.0;
  double trajectory_horizon = 0.0;
  bool dump_paths = false;
  std::string gains_path;
};

sim::InitialCondition initial_or_default(const LoadedConfig& cfg) {
  if (cfg.init) return *cfg.init;
  sim::InitialCondition init;
  init.s = 0.0;
  init.regime = 0;
  init.xi2 = Vec::Zero(cfg.spec.n);
  init.xi1_coef = Vec::Zero(cfg.spec.n);
  return init;
}

json certificate_json(const stability::StabilityCertificate& cert) {
  json j;
  j["epsilon"] = cert.epsilon;
  j["abscissa"] = cert.abscissa;
  j["P1"] = to_json(cert.P1);
  j["P2"] = to_json(cert.P2);
  return j;
}

void write_are_json(const std::string& out_dir, const riccati::AreSolution& are) {
  json j;
  j["P1"] = to_json(are.P1);
  j["P2"] = to_json(are.P2);
  j["Theta1"] = to_json(are.gains.theta1);
  j["Theta2"] = to_json(are.gains.theta2);
  j["residual"] = are.residual_norm;
  j["certificate"] = certificate_json(are.certificate);
  j["final_horizon"] = are.final_horizon;
  j["iterations"] = are.iterations;
  write_json(artifact_path(out_dir, "are.json"), j);
}

void write_adjoint_csv(const std::string& out_dir, const model::DecomposedModel& dm,
                       const bsde::AdjointSolution& adjoint, const bsde::OffsetControls& offsets) {
  const std::string path = artifact_path(out_dir, "adjoint.csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(ErrorCode::UnsupportedInput, "cannot write '" + path + "'");
  out << "t,regime";
  for (int i = 0; i < dm.n; ++i) out << ",y2_" << i;
  for (int i = 0; i < dm.n; ++i) out << ",w1_" << i;
  for (int i = 0; i < dm.m; ++i) out << ",v2_" << i;
  for (int i = 0; i < dm.m; ++i) out << ",v1_coef_" << i;
  out << '\n';
  // Offsets live on the finer of the two grids (it contains the adjoint
  // nodes), so rows are emitted on that grid.
  const std::vector<double>& grid = offsets.t.empty() ? adjoint.t : offsets.t;
  Vec y2(dm.n), w1(dm.n), v2(dm.m), v1(dm.m);
  std::vector<double> row;
  for (double t : grid) {
    for (int r = 0; r < dm.num_regimes(); ++r) {
      adjoint.y2_at(t, r, y2);
      adjoint.w1_at(t, r, w1);
      offsets.v2_at(t, r, v2);
      offsets.v1_coef_at(t, r, v1);
      row.clear();
      row.push_back(t);
      row.push_back(static_cast<double>(r));
      for (int i = 0; i < dm.n; ++i) row.push_back(y2(i));
      for (int i = 0; i < dm.n; ++i) row.push_back(w1(i));
      for (int i = 0; i < dm.m; ++i) row.push_back(v2(i));
      for (int i = 0; i < dm.m; ++i) row.push_back(v1(i));
      out << csv_row(row) << '\n';
    }
  }
}

int run_check_stability(const CommonOptions& opt) {
  const LoadedConfig cfg = load_config(opt.config_path);
  const model::DecomposedModel dm = model::decompose(cfg.spec);
  stability::Gains gains =
      opt.gains_path.empty()
          ? stability::Gains::zero(dm.n, dm.m, dm.num_regimes())
          : load_gains(opt.gains_path, dm.n, dm.m, dm.num_regimes());

  const Mat op = stability::second_moment_generator(dm, gains);
  const double abscissa = stability::spectral_abscissa(op);
  std::optional<stability::StabilityCertificate> cert;
  try {
    cert = stability::certify(dm, gains);
  } catch (const SolverError& e) {
    if (e.code() != ErrorCode::SingularOperator) throw;
  }

  json j;
  j["abscissa"] = abscissa;
  j["stabilizer"] = cert.has_value();
  if (cert) j["certificate"] = certificate_json(*cert);
  j["warnings"] = dm.gen.warnings;
  write_json(artifact_path(opt.out_dir, "stability.json"), j);
  write_manifest(opt.out_dir, "check-stability", opt.config_path,
                 json{{"gains", opt.gains_path}});

  std::printf("abscissa %.6e; %s\n", abscissa,
              cert ? "closed loop is mean-square stable" : "closed loop is NOT mean-square stable");
  return 0;
}

void write_trajectory_csv(const std::string& out_dir, const model::DecomposedModel& dm,
                          double horizon, double step) {
  const riccati::RiccatiTrajectory traj = riccati::integrate_finite_horizon(dm, horizon, step);
  const std::string path = artifact_path(out_dir, "trajectory.csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(ErrorCode::UnsupportedInput, "cannot write '" + path + "'");
  out << "t,component,regime";
  for (int r = 0; r < dm.n; ++r) {
    for (int c = 0; c < dm.n; ++c) out << ",P_" << r << c;
  }
  out << '\n';
  std::vector<double> row;
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    for (int k = 1; k <= 2; ++k) {
      const std::vector<PerRegime<Mat>>& blocks = (k == 1) ? traj.P1 : traj.P2;
      for (int reg = 0; reg < dm.num_regimes(); ++reg) {
        row.clear();
        row.push_back(traj.t[i]);
        row.push_back(static_cast<double>(k));
        row.push_back(static_cast<double>(reg));
        const Mat& p = blocks[i][static_cast<std::size_t>(reg)];
        for (int r = 0; r < dm.n; ++r) {
          for (int c = 0; c < dm.n; ++c) row.push_back(p(r, c));
        }
        out << csv_row(row) << '\n';
      }
    }
  }
}

int run_solve_are(const CommonOptions& opt) {
  const LoadedConfig cfg = load_config(opt.config_path);
  const model::DecomposedModel dm = model::decompose(cfg.spec);
  const riccati::AreSolution are = riccati::solve_are(dm, opt.tol);
  write_are_json(opt.out_dir, are);
  if (opt.trajectory_horizon > 0.0) {
    write_trajectory_csv(opt.out_dir, dm, opt.trajectory_horizon, 2e-3);
  }
  write_manifest(opt.out_dir, "solve-are", opt.config_path,
                 json{{"tol", opt.tol}, {"trajectory_horizon", opt.trajectory_horizon}});
  std::printf("residual %.3e, certified decay rate %.6f, horizon %.1f\n", are.residual_norm,
              are.certificate.epsilon, are.final_horizon);
  return 0;
}

int run_solve_bsde(const CommonOptions& opt) {
  const LoadedConfig cfg = load_config(opt.config_path);
  const model::DecomposedModel dm = model::decompose(cfg.spec);
  const riccati::AreSolution are = riccati::solve_are(dm, opt.tol);
  const bsde::Drivers drivers = bsde::assemble_drivers(dm, are.P1, are.P2, are.gains);
  const bsde::AdjointSolution adjoint = bsde::solve_adjoint(dm, are, drivers);
  const bsde::OffsetControls offsets = bsde::compute_offsets(dm, are, adjoint);
  write_adjoint_csv(opt.out_dir, dm, adjoint, offsets);
  write_manifest(opt.out_dir, "solve-bsde", opt.config_path, json{{"tol", opt.tol}});
  std::printf("adjoint support end %.6f, %zu grid nodes\n", adjoint.T_in, adjoint.t.size());
  return 0;
}

int run_synthesize(const CommonOptions& opt) {
  const LoadedConfig cfg = load_config(opt.config_path);
  const model::DecomposedModel dm = model::decompose(cfg.spec);
  const riccati::AreSolution are = riccati::solve_are(dm, opt.tol);
  const bsde::Drivers drivers = bsde::assemble_drivers(dm, are.P1, are.P2, are.gains);
  const bsde::AdjointSolution adjoint = bsde::solve_adjoint(dm, are, drivers);
  const bsde::OffsetControls offsets = bsde::compute_offsets(dm, are, adjoint);
  write_are_json(opt.out_dir, are);
  write_adjoint_csv(opt.out_dir, dm, adjoint, offsets);

  if (cfg.init) {
    const sim::InitialCondition& init = *cfg.init;
    json j;
    j["s"] = init.s;
    j["regime"] = init.regime;
    j["value"] = bsde::optimal_value(dm, are, adjoint, init.s, init.regime, init.xi1_coef,
                                     init.xi2, bsde::ValueConvention::Derivation);
    j["value_alternate"] = bsde::optimal_value(dm, are, adjoint, init.s, init.regime,
                                               init.xi1_coef, init.xi2,
                                               bsde::ValueConvention::AlternateBox);
    j["convention"] = bsde::to_string(bsde::ValueConvention::Derivation);
    write_json(artifact_path(opt.out_dir, "value.json"), j);
  }
  write_manifest(opt.out_dir, "synthesize", opt.config_path, json{{"tol", opt.tol}});
  std::printf("synthesized: residual %.3e, decay rate %.6f%s\n", are.residual_norm,
              are.certificate.epsilon, cfg.init ? ", value written" : "");
  return 0;
}

int run_simulate(const CommonOptions& opt) {
  const LoadedConfig cfg = load_config(opt.config_path);
  const model::DecomposedModel dm = model::decompose(cfg.spec);
  const riccati::AreSolution are = riccati::solve_are(dm, opt.tol);
  const bsde::Drivers drivers = bsde::assemble_drivers(dm, are.P1, are.P2, are.gains);
  const bsde::AdjointSolution adjoint = bsde::solve_adjoint(dm, are, drivers);
  const bsde::OffsetControls offsets = bsde::compute_offsets(dm, are, adjoint);
  const sim::ControlLaw law = sim::feedback_law(are, offsets);

  sim::SimConfig scfg;
  scfg.init = initial_or_default(cfg);
  scfg.dt = opt.dt;
  scfg.horizon = opt.horizon;
  scfg.num_paths = opt.paths;
  scfg.seed = opt.seed;
  scfg.threads = opt.threads;

  const sim::CostEstimate est = sim::estimate_cost(dm, law, scfg, are);
  json j;
  j["mean"] = est.mean;
  j["stderr"] = est.standard_error;
  j["tail"] = est.tail_bound;
  j["terminal_moment"] = est.terminal_moment;
  j["horizon"] = est.horizon;
  j["N"] = est.num_paths;
  write_json(artifact_path(opt.out_dir, "cost.json"), j);

  if (opt.dump_paths) {
    const std::string path = artifact_path(opt.out_dir, "paths.csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(ErrorCode::UnsupportedInput, "cannot write '" + path + "'");
    out << "path,t,regime,W";
    for (int i = 0; i < dm.n; ++i) out << ",X1_" << i;
    for (int i = 0; i < dm.n; ++i) out << ",X2_" << i;
    for (int i = 0; i < dm.m; ++i) out << ",u1_" << i;
    for (int i = 0; i < dm.m; ++i) out << ",u2_" << i;
    out << '\n';
    sim::SimConfig dump_cfg = scfg;
    dump_cfg.horizon = est.horizon;
    std::vector<double> row;
    sim::for_each_path(dm, law, dump_cfg, [&](int idx, const sim::PathRecord& rec) {
      for (std::size_t i = 0; i < rec.t.size(); ++i) {
        row.clear();
        row.push_back(static_cast<double>(idx));
        row.push_back(rec.t[i]);
        row.push_back(static_cast<double>(rec.regime[i]));
        row.push_back(rec.W[i]);
        const int c = static_cast<int>(i);
        for (int k = 0; k < dm.n; ++k) row.push_back(rec.X1(k, c));
        for (int k = 0; k < dm.n; ++k) row.push_back(rec.X2(k, c));
        for (int k = 0; k < dm.m; ++k) row.push_back(rec.U1(k, c));
        for (int k = 0; k < dm.m; ++k) row.push_back(rec.U2(k, c));
        out << csv_row(row) << '\n';
      }
    });
  }

  write_manifest(opt.out_dir, "simulate", opt.config_path,
                 json{{"tol", opt.tol},
                      {"seed", opt.seed},
                      {"paths", opt.paths},
                      {"dt", opt.dt},
                      {"horizon", opt.horizon},
                      {"threads", opt.threads},
                      {"dump_paths", opt.dump_paths}});
  std::printf("cost %.6f +- %.6f (tail bound %.2e, N = %d, horizon %.2f)\n", est.mean,
              est.standard_error, est.tail_bound, est.num_paths, est.horizon);
  return 0;
}

/// Deterministic affine perturbation directions for the optimality check:
/// alternating deterministic / Wiener-linear profiles with random entries
/// decaying to zero at the support end.
std::vector<model::InhomogeneityProcess> make_directions(const model::DecomposedModel& dm,
                                                         int count, std::uint64_t seed) {
  const double t_end = std::max(1.0, model::input_support_end(dm));
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<model::InhomogeneityProcess> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  for (int d = 0; d < count; ++d) {
    model::InhomogeneityProcess p;
    p.T_in = t_end;
    p.breakpoints = {0.0, t_end};
    p.g.assign(static_cast<std::size_t>(dm.num_regimes()), Mat::Zero(dm.m, 2));
    p.h.assign(static_cast<std::size_t>(dm.num_regimes()), Mat::Zero(dm.m, 2));
    const bool wiener = (d % 2 == 1);
    for (int r = 0; r < dm.num_regimes(); ++r) {
      for (int i = 0; i < dm.m; ++i) {
        const double v = 2.0 * rng.uniform() - 1.0;
        (wiener ? p.h : p.g)[static_cast<std::size_t>(r)](i, 0) = v;
      }
    }
    dirs.push_back(std::move(p));
  }
  return dirs;
}

int run_verify(const CommonOptions& opt) {
  const LoadedConfig cfg = load_config(opt.config_path);
  const model::DecomposedModel dm = model::decompose(cfg.spec);
  const riccati::AreSolution are = riccati::solve_are(dm, opt.tol);
  const bsde::Drivers drivers = bsde::assemble_drivers(dm, are.P1, are.P2, are.gains);
  const bsde::AdjointSolution adjoint = bsde::solve_adjoint(dm, are, drivers);
  const bsde::OffsetControls offsets = bsde::compute_offsets(dm, are, adjoint);

  sim::SimConfig mart_cfg;
  mart_cfg.init = initial_or_default(cfg);
  mart_cfg.horizon = opt.horizon > 0.0 ? opt.horizon : mart_cfg.init.s + 5.0;
  mart_cfg.num_paths = opt.paths;
  mart_cfg.seed = opt.seed;
  const sim::MartingaleReport mart = sim::martingale_check(dm, are, mart_cfg, 20);

  sim::SimConfig stat_cfg;
  stat_cfg.init = mart_cfg.init;
  stat_cfg.dt = opt.dt;
  stat_cfg.horizon = sim::resolve_horizon(dm, sim::SimConfig{mart_cfg.init, opt.dt, opt.horizon},
                                          are.certificate.epsilon);
  stat_cfg.num_paths = std::max(2, opt.paths / 4);
  stat_cfg.seed = opt.seed;
  const std::vector<model::InhomogeneityProcess> dirs = make_directions(dm, 4, opt.seed);
  const sim::StationarityReport stat =
      sim::stationarity_check(dm, are, offsets, dirs, 0.05, stat_cfg);

  const bool pass = mart.pass(opt.max_z) && stat.pass(opt.max_z);
  json j;
  j["max_z"] = opt.max_z;
  j["pass"] = pass;
  j["martingale"] = {{"max_abs_z", mart.max_abs_z},
                     {"buckets", mart.bucket_times.size()},
                     {"N", mart.num_paths},
                     {"horizon", mart_cfg.horizon}};
  json dir_stats = json::array();
  for (const sim::DirectionStat& d : stat.directions) {
    dir_stats.push_back({{"deriv", d.deriv},
                         {"deriv_z", d.deriv_z},
                         {"deriv_wide", d.deriv_wide},
                         {"deriv_wide_z", d.deriv_wide_z},
                         {"curvature", d.curvature}});
  }
  j["stationarity"] = {{"max_abs_z", stat.max_abs_z},
                       {"curvature_ok", stat.curvature_ok},
                       {"epsilon", stat.epsilon},
                       {"N", stat.num_paths},
                       {"horizon", stat_cfg.horizon},
                       {"directions", dir_stats}};
  write_json(artifact_path(opt.out_dir, "verify.json"), j);
  write_manifest(opt.out_dir, "verify", opt.config_path,
                 json{{"tol", opt.tol},
                      {"seed", opt.seed},
                      {"paths", opt.paths},
                      {"dt", opt.dt},
                      {"max_z", opt.max_z}});

  std::printf("martingale max |z| = %.3f, optimality max |z| = %.3f, curvature %s\n",
              mart.max_abs_z, stat.max_abs_z, stat.curvature_ok ? "positive" : "NOT positive");
  if (!pass) {
    throw VerificationError("verification failed: a z-score exceeded " +
                            std::to_string(opt.max_z));
  }
  std::printf("verification passed\n");
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Stationary control of regime-switching linear dynamics with mean-field coupling"};
  app.require_subcommand(1);
  CommonOptions opt;

  auto add_common = [&opt](CLI::App* cmd) {
    cmd->add_option("config", opt.config_path, "Problem file (JSON)")->required();
    cmd->add_option("--out", opt.out_dir, "Artifact directory")->capture_default_str();
    cmd->add_option("--tol", opt.tol, "Stationary solver tolerance")->capture_default_str();
  };

  CLI::App* check = app.add_subcommand("check-stability",
                                       "Certify mean-square stability of a feedback law");
  add_common(check);
  check->add_option("--gains", opt.gains_path,
                    "Gains file {Theta1, Theta2}; omitted means zero feedback");

  CLI::App* are_cmd = app.add_subcommand("solve-are", "Solve the stationary Riccati system");
  add_common(are_cmd);
  are_cmd->add_option("--trajectory-horizon", opt.trajectory_horizon,
                      "Also dump the finite-horizon trajectory up to this time");

  CLI::App* bsde_cmd =
      app.add_subcommand("solve-bsde", "Solve the adjoint equations and offset controls");
  add_common(bsde_cmd);

  CLI::App* synth = app.add_subcommand(
      "synthesize", "Full synthesis: Riccati blocks, gains, offsets, optimal value");
  add_common(synth);

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo cost of the synthesized law");
  add_common(simulate);
  simulate->add_option("--paths", opt.paths, "Number of paths")->capture_default_str();
  simulate->add_option("--seed", opt.seed, "Base RNG seed")->capture_default_str();
  simulate->add_option("--dt", opt.dt, "Euler step")->capture_default_str();
  simulate->add_option("--horizon", opt.horizon,
                       "Simulation end time (nonpositive: from the certificate)");
  simulate->add_option("--threads", opt.threads, "Worker threads (0: hardware)")
      ->envname("SWITCHLQ_THREADS")
      ->capture_default_str();
  simulate->add_flag("--dump-paths", opt.dump_paths, "Also write every trajectory to paths.csv");

  CLI::App* verify =
      app.add_subcommand("verify", "Statistical verification of the synthesized law");
  add_common(verify);
  verify->add_option("--paths", opt.paths, "Paths for the martingale check")
      ->capture_default_str();
  verify->add_option("--seed", opt.seed, "Base RNG seed")->capture_default_str();
  verify->add_option("--dt", opt.dt, "Euler step")->capture_default_str();
  verify->add_option("--horizon", opt.horizon, "Override the check horizons");
  verify->add_option("--max-z", opt.max_z, "z-score acceptance threshold")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (check->parsed()) return run_check_stability(opt);
  if (are_cmd->parsed()) return run_solve_are(opt);
  if (bsde_cmd->parsed()) return run_solve_bsde(opt);
  if (synth->parsed()) return run_synthesize(opt);
  if (simulate->parsed()) return run_simulate(opt);
  if (verify->parsed()) return run_verify(opt);
  return 0;
}

}  // namespace
}  // namespace switchlq::cli

int main(int argc, char** argv) {
  try {
    return switchlq::cli::dispatch(argc, argv);
  } catch (const switchlq::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  } catch (const switchlq::SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 2;
  } catch (const switchlq::VerificationError& e) {
    std::fprintf(stderr, "verification error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
