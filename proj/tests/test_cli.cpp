#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "switchlq/riccati.hpp"
#include "test_instances.hpp"

using nlohmann::json;
using namespace switchlq;

namespace {

namespace fs = std::filesystem;

std::string required_env(const char* name) {
  const char* value = std::getenv(name);
  REQUIRE_MESSAGE(value != nullptr, name << " must be set by the test harness");
  return value;
}

fs::path workspace(const std::string& name) {
  const fs::path dir = fs::current_path() / "cli_artifacts" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_tool(const std::string& args, const fs::path& log) {
  const std::string cmd =
      "'" + required_env("SWITCHLQ_BIN") + "' " + args + " > '" + log.string() + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string config(const std::string& name) {
  return "'" + required_env("SWITCHLQ_CONFIG_DIR") + "/" + name + "'";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing artifact " << path.string());
  json j;
  in >> j;
  return j;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Mat json_matrix(const json& j) {
  Mat m(j.size(), j.at(0).size());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

}  // namespace

TEST_CASE("solve-are artifact agrees with the in-process solver") {
  const fs::path dir = workspace("solve_are");
  const int rc = run_tool("solve-are " + config("twostate.json") + " --out '" + dir.string() + "'",
                          dir / "log.txt");
  REQUIRE(rc == 0);

  const json j = read_json(dir / "are.json");
  const model::DecomposedModel dm = model::decompose(testing::make_twostate());
  const riccati::AreSolution are = riccati::solve_are(dm);

  // This pins the JSON schema against the C++ fixture: any transcription
  // drift between configs/twostate.json and test_instances.hpp shows up here.
  for (int i = 0; i < 2; ++i) {
    CHECK((json_matrix(j.at("P1").at(i)) - are.P1[i]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((json_matrix(j.at("P2").at(i)) - are.P2[i]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((json_matrix(j.at("Theta1").at(i)) - are.gains.theta1[i]).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((json_matrix(j.at("Theta2").at(i)) - are.gains.theta2[i]).cwiseAbs().maxCoeff() <
          1e-12);
  }
  CHECK(j.at("residual").get<double>() < 1e-8);
  CHECK(j.at("certificate").at("epsilon").get<double>() > 0.0);
  CHECK((read_json(dir / "manifest.json").at("command").get<std::string>()) == "solve-are");
}

TEST_CASE("solver artifacts are byte-identical across runs") {
  const fs::path a = workspace("repeat_a");
  const fs::path b = workspace("repeat_b");
  REQUIRE(run_tool("solve-are " + config("twostate.json") + " --out '" + a.string() + "'",
                   a / "log.txt") == 0);
  REQUIRE(run_tool("solve-are " + config("twostate.json") + " --out '" + b.string() + "'",
                   b / "log.txt") == 0);
  const std::string bytes_a = read_bytes(a / "are.json");
  REQUIRE(!bytes_a.empty());
  CHECK(bytes_a == read_bytes(b / "are.json"));
}

TEST_CASE("synthesize writes the closed-form scalar value") {
  const fs::path dir = workspace("synthesize");
  const int rc = run_tool(
      "synthesize " + config("scalar_benchmark.json") + " --out '" + dir.string() + "'",
      dir / "log.txt");
  REQUIRE(rc == 0);
  const json j = read_json(dir / "value.json");
  // xi2 = 1, s = 0, no inputs: V = P/2 with P = sqrt(2) - 1.
  const double exact = 0.5 * (std::sqrt(2.0) - 1.0);
  CHECK(j.at("value").get<double>() == doctest::Approx(exact).epsilon(1e-9));
  CHECK(j.at("value_alternate").get<double>() ==
        doctest::Approx(j.at("value").get<double>()).epsilon(1e-12));
  CHECK(j.at("convention").get<std::string>() == "derivation");

  // The adjoint table is written alongside, with a labeled header.
  std::ifstream adjoint(dir / "adjoint.csv");
  std::string header;
  std::getline(adjoint, header);
  CHECK(header.rfind("t,regime,", 0) == 0);
}

TEST_CASE("check-stability reports the known spectral abscissa") {
  const fs::path dir = workspace("check_stability");
  const int rc = run_tool(
      "check-stability " + config("switching_scalar.json") + " --out '" + dir.string() + "'",
      dir / "log.txt");
  REQUIRE(rc == 0);
  const json j = read_json(dir / "stability.json");
  CHECK(j.at("stabilizer").get<bool>());
  CHECK(j.at("abscissa").get<double>() ==
        doctest::Approx((-11.0 + std::sqrt(65.0)) / 2.0).epsilon(1e-9));
  CHECK(j.at("certificate").at("epsilon").get<double>() ==
        doctest::Approx(14.0 / 13.0).epsilon(1e-9));
}

TEST_CASE("simulate writes a cost estimate and optional path dump") {
  const fs::path dir = workspace("simulate");
  const int rc = run_tool("simulate " + config("scalar_benchmark.json") + " --paths 40" +
                              " --horizon 3 --dump-paths --out '" + dir.string() + "'",
                          dir / "log.txt");
  REQUIRE(rc == 0);
  const json j = read_json(dir / "cost.json");
  CHECK(j.at("N").get<int>() == 40);
  CHECK(j.at("horizon").get<double>() == 3.0);
  CHECK(std::isfinite(j.at("mean").get<double>()));
  CHECK(j.at("stderr").get<double>() >= 0.0);

  std::ifstream paths(dir / "paths.csv");
  std::string header;
  std::getline(paths, header);
  CHECK(header.rfind("path,t,regime,W", 0) == 0);
  int lines = 0;
  for (std::string line; std::getline(paths, line);) ++lines;
  CHECK(lines >= 40 * 100);
}

TEST_CASE("failure exit codes follow the error taxonomy") {
  const fs::path dir = workspace("failures");

  CHECK(run_tool("solve-are '" + (dir / "missing.json").string() + "'", dir / "log1.txt") == 1);

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{\"n\": 1}";
  CHECK(run_tool("solve-are '" + bad.string() + "'", dir / "log2.txt") == 1);

  // An impossible z threshold trips the verification gate.
  const int rc = run_tool("verify " + config("twostate.json") + " --paths 40 --max-z 1e-9" +
                              " --out '" + dir.string() + "'",
                          dir / "log3.txt");
  CHECK(rc == 3);
  CHECK(fs::exists(dir / "verify.json"));
}
