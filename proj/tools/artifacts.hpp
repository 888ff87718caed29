#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "switchlq/types.hpp"

namespace switchlq::cli {

/// FNV-1a 64-bit digest of a file's raw bytes, as 16 hex characters.
std::string file_digest(const std::string& path);

/// Matrix as nested row-major JSON arrays.
nlohmann::json to_json(const Mat& m);
nlohmann::json to_json(const PerRegime<Mat>& blocks);

/// Writes pretty-printed JSON (sorted keys, trailing newline). Output bytes
/// depend only on the document content.
void write_json(const std::string& path, const nlohmann::json& j);

/// Formats one CSV row with "%.17g" cells.
std::string csv_row(const std::vector<double>& values);

/// Run manifest: records what produced the other artifacts. This is the only
/// artifact that contains a timestamp.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_path, nlohmann::json parameters);

/// Creates the directory (and parents) if needed; returns path with a
/// trailing separator applied to `name`.
std::string artifact_path(const std::string& out_dir, const std::string& name);

}  // namespace switchlq::cli
