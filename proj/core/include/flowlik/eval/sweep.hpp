#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowlik/flow.hpp"
#include "flowlik/likelihood.hpp"

namespace flowlik::eval {

struct SweepConfig {
  /// Equally spaced in [0, T] from T down to 0; 0 is clipped to the solver's t_min.
  std::size_t num_times = 8;
  std::size_t num_samples = 64;
  std::uint64_t seed = 0;
  SolverConfig sampler = SolverConfig::rk45(1e-5, 1e-5);
  LikelihoodConfig likelihood{};
  std::size_t workers = 1;
};

struct SweepRow {
  double t = 0.0;
  double mean_bpd = 0.0;
  double se_bpd = 0.0;  // standard error of the mean over samples
  std::size_t count = 0;
};

struct SweepResult {
  std::vector<double> times;  // descending
  Matrix bpd;                 // samples x times
  std::vector<SweepRow> rows;
};

/// Times T, ..., 0 (num_times points), with the last clipped to t_min.
std::vector<double> sweep_times(std::size_t num_times, double terminal_time, double t_min);

/// Draws prior samples, integrates them to t_min with checkpoints at the sweep
/// times, and evaluates log p_t at each checkpoint.
SweepResult sweep_time(const FlowField& field, const SweepConfig& cfg);

/// mean_bpd[k+1] <= mean_bpd[k] + num_se * sqrt(se[k]^2 + se[k+1]^2) for all k.
bool bpd_non_increasing(const SweepResult& result, double num_se);

}  // namespace flowlik::eval
