#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "outputs.hpp"

namespace flowlik::cli {

struct Artifacts {
  std::vector<std::filesystem::path> files;
  std::string summary;  // one line for the terminal
};

Artifacts cmd_dataset(const RunConfig& cfg, const RunContext& ctx);
Artifacts cmd_train(const RunConfig& cfg, const RunContext& ctx);
/// Scores the input CSV, or the configured dataset when no input is given.
Artifacts cmd_likelihood(const RunConfig& cfg, const RunContext& ctx, const std::optional<std::filesystem::path>& input);
Artifacts cmd_classify(const RunConfig& cfg, const RunContext& ctx);
Artifacts cmd_rescore(const RunConfig& cfg, const RunContext& ctx);
Artifacts cmd_sweep(const RunConfig& cfg, const RunContext& ctx);
Artifacts cmd_reconstruct(const RunConfig& cfg, const RunContext& ctx,
                          const std::optional<std::filesystem::path>& input);
Artifacts cmd_adapt(const RunConfig& cfg, const RunContext& ctx);

}  // namespace flowlik::cli
