#include "config_io.hpp"

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace switchlq::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
  throw ConfigError(ErrorCode::UnsupportedInput, message);
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail("'" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) fail("'" + path + "' must hold a JSON object");
  return j;
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where + " must be a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where + " must be an integer");
  return j.get<int>();
}

Mat parse_matrix(const json& j, int rows, int cols, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    fail(where + " must be a " + std::to_string(rows) + " x " + std::to_string(cols) +
         " nested array");
  }
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      fail(where + " row " + std::to_string(r) + " must have " + std::to_string(cols) +
           " entries");
    }
    for (int c = 0; c < cols; ++c) {
      m(r, c) = as_number(row[static_cast<std::size_t>(c)],
                          where + "(" + std::to_string(r) + "," + std::to_string(c) + ")");
    }
  }
  return m;
}

Vec parse_vector(const json& j, int size, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != size) {
    fail(where + " must be an array of " + std::to_string(size) + " numbers");
  }
  Vec v(size);
  for (int i = 0; i < size; ++i) {
    v(i) = as_number(j[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

Mat regime_matrix(const json& regime, const char* key, int rows, int cols,
                  const std::string& where) {
  if (!regime.contains(key)) return Mat::Zero(rows, cols);
  return parse_matrix(regime.at(key), rows, cols, where + "." + key);
}

PerRegime<Mat> parse_tables(const json& j, int dim, int nbp, int num_regimes,
                            const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != num_regimes) {
    fail(where + " must be an array with one table per regime");
  }
  PerRegime<Mat> tables;
  tables.reserve(static_cast<std::size_t>(num_regimes));
  for (int i = 0; i < num_regimes; ++i) {
    tables.push_back(parse_matrix(j[static_cast<std::size_t>(i)], dim, nbp,
                                  where + "[" + std::to_string(i) + "]"));
  }
  return tables;
}

model::InhomogeneityProcess parse_process(const json& inputs, const char* key, int dim,
                                          int num_regimes) {
  if (!inputs.contains(key)) return model::InhomogeneityProcess::zero(dim, num_regimes);
  const json& j = inputs.at(key);
  const std::string where = std::string("inputs.") + key;
  if (!j.is_object()) fail(where + " must be an object");
  if (!j.contains("breakpoints")) fail(where + " needs breakpoints");
  const json& bps = j.at("breakpoints");
  if (!bps.is_array() || bps.empty()) fail(where + ".breakpoints must be a nonempty array");

  model::InhomogeneityProcess proc;
  proc.breakpoints.reserve(bps.size());
  for (std::size_t i = 0; i < bps.size(); ++i) {
    proc.breakpoints.push_back(
        as_number(bps[i], where + ".breakpoints[" + std::to_string(i) + "]"));
  }
  proc.T_in = j.contains("T_in") ? as_number(j.at("T_in"), where + ".T_in")
                                 : proc.breakpoints.back();
  const int nbp = static_cast<int>(proc.breakpoints.size());
  proc.g = j.contains("g") ? parse_tables(j.at("g"), dim, nbp, num_regimes, where + ".g")
                           : PerRegime<Mat>(static_cast<std::size_t>(num_regimes),
                                            Mat::Zero(dim, nbp));
  proc.h = j.contains("h") ? parse_tables(j.at("h"), dim, nbp, num_regimes, where + ".h")
                           : PerRegime<Mat>(static_cast<std::size_t>(num_regimes),
                                            Mat::Zero(dim, nbp));
  return proc;
}

}  // namespace

LoadedConfig load_config(const std::string& path) {
  const json j = load_json(path);
  for (const char* key : {"n", "m", "generator", "regimes"}) {
    if (!j.contains(key)) fail(std::string("missing required key '") + key + "'");
  }

  LoadedConfig out;
  model::ProblemSpec& spec = out.spec;
  spec.n = as_int(j.at("n"), "n");
  spec.m = as_int(j.at("m"), "m");
  if (spec.n < 1 || spec.m < 1) fail("n and m must be at least 1");

  const json& gen = j.at("generator");
  if (!gen.is_array() || gen.empty()) fail("generator must be a square nested array");
  const int m0 = static_cast<int>(gen.size());
  spec.gen = chain::validate_generator(parse_matrix(gen, m0, m0, "generator"));

  const json& regimes = j.at("regimes");
  if (!regimes.is_array() || static_cast<int>(regimes.size()) != m0) {
    fail("regimes must be an array with one object per generator row");
  }
  const int n = spec.n;
  const int m = spec.m;
  spec.regimes.reserve(static_cast<std::size_t>(m0));
  for (int i = 0; i < m0; ++i) {
    const json& rj = regimes[static_cast<std::size_t>(i)];
    const std::string where = "regimes[" + std::to_string(i) + "]";
    if (!rj.is_object()) fail(where + " must be an object");
    for (const char* key : {"A", "Q", "R"}) {
      if (!rj.contains(key)) fail(where + " needs '" + key + "'");
    }
    model::RegimeCoefficients rc;
    rc.A = parse_matrix(rj.at("A"), n, n, where + ".A");
    rc.Abar = regime_matrix(rj, "Abar", n, n, where);
    rc.B = regime_matrix(rj, "B", n, m, where);
    rc.Bbar = regime_matrix(rj, "Bbar", n, m, where);
    rc.C = regime_matrix(rj, "C", n, n, where);
    rc.Cbar = regime_matrix(rj, "Cbar", n, n, where);
    rc.D = regime_matrix(rj, "D", n, m, where);
    rc.Dbar = regime_matrix(rj, "Dbar", n, m, where);
    rc.Q = parse_matrix(rj.at("Q"), n, n, where + ".Q");
    rc.Qbar = regime_matrix(rj, "Qbar", n, n, where);
    rc.S = regime_matrix(rj, "S", m, n, where);
    rc.Sbar = regime_matrix(rj, "Sbar", m, n, where);
    rc.R = parse_matrix(rj.at("R"), m, m, where + ".R");
    rc.Rbar = regime_matrix(rj, "Rbar", m, m, where);
    spec.regimes.push_back(std::move(rc));
  }

  const json inputs = j.contains("inputs") ? j.at("inputs") : json::object();
  if (!inputs.is_object()) fail("inputs must be an object");
  spec.b = parse_process(inputs, "b", n, m0);
  spec.sigma = parse_process(inputs, "sigma", n, m0);
  spec.q = parse_process(inputs, "q", n, m0);
  spec.qbar = parse_process(inputs, "qbar", n, m0);
  spec.r = parse_process(inputs, "r", m, m0);
  spec.rbar = parse_process(inputs, "rbar", m, m0);

  if (j.contains("initial")) {
    const json& ij = j.at("initial");
    if (!ij.is_object()) fail("initial must be an object");
    sim::InitialCondition init;
    init.s = ij.contains("s") ? as_number(ij.at("s"), "initial.s") : 0.0;
    init.regime = ij.contains("regime") ? as_int(ij.at("regime"), "initial.regime") : 0;
    init.xi2 = ij.contains("xi2") ? parse_vector(ij.at("xi2"), n, "initial.xi2") : Vec::Zero(n);
    init.xi1_coef = ij.contains("xi1_coef")
                        ? parse_vector(ij.at("xi1_coef"), n, "initial.xi1_coef")
                        : Vec::Zero(n);
    out.init = std::move(init);
  }
  return out;
}

stability::Gains load_gains(const std::string& path, int n, int m, int num_regimes) {
  const json j = load_json(path);
  for (const char* key : {"Theta1", "Theta2"}) {
    if (!j.contains(key)) fail(std::string("gains file missing '") + key + "'");
  }
  stability::Gains gains;
  gains.theta1 = parse_tables(j.at("Theta1"), m, n, num_regimes, "Theta1");
  gains.theta2 = parse_tables(j.at("Theta2"), m, n, num_regimes, "Theta2");
  return gains;
}

}  // namespace switchlq::cli
