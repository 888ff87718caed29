#include "artifacts.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

namespace switchlq::cli {

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(ErrorCode::UnsupportedInput, "cannot open '" + path + "' for hashing");
  }
  std::uint64_t hash = 1469598103934665603ULL;
  char buffer[4096];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
  return out;
}

nlohmann::json to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json to_json(const PerRegime<Mat>& blocks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Mat& m : blocks) arr.push_back(to_json(m));
  return arr;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError(ErrorCode::UnsupportedInput, "cannot write '" + path + "'");
  }
  out << j.dump(2) << '\n';
}

std::string csv_row(const std::vector<double>& values) {
  std::string row;
  char cell[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(cell, sizeof(cell), "%.17g", values[i]);
    if (i > 0) row += ',';
    row += cell;
  }
  return row;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_path, nlohmann::json parameters) {
  nlohmann::json manifest;
  manifest["command"] = command;
  manifest["config"] = config_path;
  manifest["config_hash"] = file_digest(config_path);
  manifest["out"] = out_dir;
  manifest["parameters"] = std::move(parameters);
  manifest["tool"] = "switchlq 0.1.0";

  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  manifest["generated_at"] = stamp;

  write_json(artifact_path(out_dir, "manifest.json"), manifest);
}

std::string artifact_path(const std::string& out_dir, const std::string& name) {
  std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw ConfigError(ErrorCode::UnsupportedInput,
                      "cannot create output directory '" + out_dir + "': " + ec.message());
  }
  return (dir / name).string();
}

}  // namespace switchlq::cli
