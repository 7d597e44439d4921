#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "flowlik/condition.hpp"
#include "flowlik/mlp.hpp"
#include "flowlik/random.hpp"
#include "flowlik/sde.hpp"

namespace flowlik {

struct TrainingExample {
  Vector x0;
  Condition condition;
};

enum class DsmWeighting { StdSquared, Unit };

struct DsmOptions {
  double t_min = 1e-5;
  /// Probability that a sample's network condition is replaced by Null.
  double condition_dropout = 0.1;
  DsmWeighting weighting = DsmWeighting::StdSquared;
};

/// One perturbed training point: x_t = mean(t) + std(t) eps.
struct DsmDraw {
  double t = 0.0;
  double std = 0.0;
  double weight = 1.0;  // lambda(t)
  Vector eps;
  Vector x_t;
  Condition condition;  // fed to the network, after dropout
};

/// Draws t ~ U[t_min, T], eps ~ N(0, I) and the dropout decision for every
/// example, in example order. MRVP kernels take mu from the original condition.
std::vector<DsmDraw> draw_dsm_batch(std::span<const TrainingExample> batch, const SdeSpec& sde, Rng& rng,
                                    const DsmOptions& opts);

/// Per-sample loss lambda(t) || s + eps / std ||^2 for an arbitrary score.
double dsm_sample_loss(const DsmDraw& draw, const Vector& score);

using ScoreCallback = std::function<Vector(const DsmDraw&)>;
double dsm_loss_value(std::span<const DsmDraw> draws, const ScoreCallback& score);

struct DsmResult {
  double loss = 0.0;
  Vector grad;  // same layout as NetworkParams::values()
};

/// Mean DSM loss of the network on the draws with its exact parameter gradient.
/// Per-sample gradients are reduced in fixed chunks of 8 in sample order, so
/// the result is identical for any `workers`.
DsmResult dsm_loss(const NetworkParams& params, std::span<const DsmDraw> draws, std::size_t workers = 1);

/// Convenience: draw then evaluate.
DsmResult dsm_loss(const NetworkParams& params, std::span<const TrainingExample> batch, const SdeSpec& sde, Rng& rng,
                   const DsmOptions& opts = {}, std::size_t workers = 1);

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double clip_norm = 10.0;
  std::size_t batch_size = 64;
};

struct TrainConfig {
  OptimizerConfig optimizer{};
  DsmOptions dsm{};
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  /// Called after optimizer step `step` (1-based count of completed steps).
  std::function<void(std::size_t step, const NetworkParams&)> on_step;
};

struct TrainResult {
  NetworkParams params;
  std::vector<double> losses;
};

/// SGD with momentum (v <- m v + g; theta <- theta - lr v) on clipped DSM
/// gradients. Throws TrainingError at the first non-finite loss.
TrainResult train(NetworkParams params, std::span<const TrainingExample> data, const SdeSpec& sde,
                  const TrainConfig& config);

}  // namespace flowlik
