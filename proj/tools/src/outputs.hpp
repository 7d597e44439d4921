#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace flowlik::cli {

/// Execution settings that never change results.
struct RunContext {
  std::filesystem::path output_dir = ".";
  std::string timestamp;
  std::size_t workers = 1;
};

/// UTC, e.g. 20260101T120000Z.
std::string utc_timestamp();

/// <dir>/<protocol>_<timestamp>_<seed>.<ext>
std::filesystem::path artifact_path(const RunContext& ctx, const std::string& protocol, std::uint64_t seed,
                                    const std::string& ext);

/// Writes the whole file or throws IoError. Creates the parent directory.
void write_file(const std::filesystem::path& path, const std::string& content);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace flowlik::cli
