#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "flowlik/mlp.hpp"
#include "flowlik/sde.hpp"

namespace flowlik {

inline constexpr std::uint32_t kParamsFormatVersion = 1;

/// A network plus the SDE it was trained under.
struct ModelFile {
  NetworkParams params;
  SdeSpec sde;  // condition_mean is never stored
};

/// Binary container, all integers little-endian:
///   bytes 0-3   magic "FLWP"
///   bytes 4-7   u32 format version
///   bytes 8-15  u64 header length H
///   next H      UTF-8 JSON header
///   zero padding to the next multiple of 8
///   N x f64     parameter values (IEEE-754 binary64, little-endian), N = header.param_count
/// See docs/formats.md for the header keys.
void write_model(std::ostream& out, const ModelFile& model);
ModelFile read_model(std::istream& in);

void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace flowlik
