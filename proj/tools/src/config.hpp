#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowlik/eval/blur.hpp"
#include "flowlik/integrate.hpp"
#include "flowlik/likelihood.hpp"
#include "flowlik/schedule.hpp"
#include "flowlik/sde.hpp"

namespace flowlik::cli {

struct SolverSection {
  std::string method = "rk45";  // rk45 | euler
  double rtol = 1e-5;
  double atol = 1e-5;
  std::size_t max_steps = 100000;
  std::size_t steps = 100;
  double t_min = 1e-5;

  SolverConfig to_solver() const;
};

struct ScoreSection {
  std::string kind = "analytic";  // analytic | mlp
  std::string model;              // params file for mlp
  std::vector<int> hidden{64, 64};
  std::string activation = "silu";
  int class_embed_dim = 8;
};

struct FieldSection {
  std::string mode = "conditional";  // conditional | guided | unconditional
  double omega = 7.0;
};

struct ProbeSection {
  std::string method = "exact";  // exact | hutchinson
  std::string distribution = "rademacher";
  std::size_t num_probes = 64;
  std::optional<double> dequantization_bins;
};

struct DatasetSection {
  std::string kind = "gmm";  // gaussian | gmm | two_domain_grids | checkerboard
  std::size_t num_samples = 200;
  std::uint64_t seed = 0;
  /// label | blur | none; auto picks blur for grids and label otherwise.
  std::string conditioning = "auto";
  std::vector<double> mean{0.0, 0.0};
  std::vector<double> var{1.0, 1.0};
  std::vector<double> weights{0.5, 0.5};
  std::vector<std::vector<double>> means{{-3.0, 0.0}, {3.0, 0.0}};
  double component_var = 1.0;
  int grid_rows = 8;
  int grid_cols = 8;
  std::string grid_domain = "both";  // both | smooth | striped
  double smooth_amplitude = 1.0;
  double stripe_amplitude = 0.5;
  double grid_noise = 0.1;
  int checker_cells = 4;
  double checker_extent = 2.0;
};

struct TrainSection {
  std::size_t steps = 5000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double clip_norm = 10.0;
  double condition_dropout = 0.1;
  std::string weighting = "std_squared";  // std_squared | unit
  std::size_t eval_batch = 1024;
};

struct RescoreSection {
  std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0};
  double base_noise = 1.0;
};

struct SweepSection {
  std::size_t num_times = 8;
  std::size_t num_samples = 64;
  std::string condition = "null";  // condition cell, as in input files
  SolverSection sampler{};
};

struct ReconstructSection {
  SolverSection forward{};
  SolverSection reverse{};
  bool trajectory = false;
};

struct AdaptSection {
  int kernel_size = 5;
  double kernel_sigma = 1.0;
  // coarse Euler near t = 0 amplifies network error by 1/std(t)
  SolverSection forward{"euler", 1e-5, 1e-5, 100000, 10, 1e-2};
  SolverSection reverse{"euler", 1e-5, 1e-5, 100000, 10, 1e-2};
  std::size_t num_samples = 16;
};

/// Everything that determines a run. Execution-only settings (worker count,
/// output directory, timestamp) are kept out of the echo so that outputs do
/// not depend on them.
struct RunConfig {
  NoiseSchedule schedule{};
  std::string sde = "vp";
  ScoreSection score{};
  FieldSection field{};
  SolverSection solver{};
  ProbeSection probes{};
  std::uint64_t seed = 0;
  DatasetSection dataset{};
  TrainSection train{};
  RescoreSection rescore{};
  SweepSection sweep{};
  ReconstructSection reconstruct{};
  AdaptSection adapt{};
  std::string output_dir = ".";

  SdeSpec sde_spec() const;
  LikelihoodConfig likelihood() const;
};

/// Strict parse: unknown keys and type errors are collected and reported
/// together in one ConfigError.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json read_config_json(const std::string& path);

/// Echo of every semantic field; parse_config(echo(c)) reproduces c.
nlohmann::json echo(const RunConfig& c);

/// Cross-field checks (schedule, enum names, sizes), in a fixed order.
std::vector<std::string> violations(const RunConfig& c);
/// Throws one ConfigError listing every violation.
void validate(const RunConfig& c);

}  // namespace flowlik::cli
