#include "flowlik/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowlik/errors.hpp"
#include "flowlik/parallel.hpp"
#include "flowlik/score.hpp"

namespace flowlik {

namespace {

constexpr std::size_t kReduceChunk = 8;

}  // namespace

std::vector<DsmDraw> draw_dsm_batch(std::span<const TrainingExample> batch, const SdeSpec& sde, Rng& rng,
                                    const DsmOptions& opts) {
  if (batch.empty()) throw ContractError("dsm: empty batch");
  const double T = sde.terminal_time();
  if (!(opts.t_min > 0.0 && opts.t_min < T)) throw ConfigError("dsm: t_min must lie in (0, T)");
  std::vector<DsmDraw> draws;
  draws.reserve(batch.size());
  for (const TrainingExample& ex : batch) {
    DsmDraw d;
    d.t = rng.uniform(opts.t_min, T);
    d.eps = rng.normal_vector(ex.x0.size());
    const bool drop = opts.condition_dropout > 0.0 && rng.bernoulli(opts.condition_dropout);
    const MarginalKernel k = score_kernel(sde, ex.condition, ex.x0.size(), d.t);
    d.std = k.std;
    d.weight = opts.weighting == DsmWeighting::StdSquared ? k.std * k.std : 1.0;
    d.x_t = k.mean(ex.x0) + k.std * d.eps;
    d.condition = drop ? Condition::null() : ex.condition;
    draws.push_back(std::move(d));
  }
  return draws;
}

double dsm_sample_loss(const DsmDraw& d, const Vector& score) {
  return d.weight * (score + d.eps / d.std).squaredNorm();
}

double dsm_loss_value(std::span<const DsmDraw> draws, const ScoreCallback& score) {
  if (draws.empty()) throw ContractError("dsm: empty batch");
  double total = 0.0;
  for (const DsmDraw& d : draws) total += dsm_sample_loss(d, score(d));
  return total / static_cast<double>(draws.size());
}

DsmResult dsm_loss(const NetworkParams& params, std::span<const DsmDraw> draws, std::size_t workers) {
  if (draws.empty()) throw ContractError("dsm: empty batch");
  const std::size_t n = draws.size();
  const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<Vector> chunk_grad(chunks);
  std::vector<double> chunk_loss(chunks, 0.0);

  parallel_for(chunks, workers, [&](std::size_t c) {
    Vector g = Vector::Zero(params.values().size());
    double loss = 0.0;
    const std::size_t end = std::min(n, (c + 1) * kReduceChunk);
    for (std::size_t i = c * kReduceChunk; i < end; ++i) {
      const DsmDraw& d = draws[i];
      const Vector input = network_input(params, d.x_t, d.t, d.condition);
      const MlpTape tape = mlp_forward(params, input);
      // score = out / std, so lambda ||score + eps/std||^2 = (lambda / std^2) ||out + eps||^2.
      const double w = d.weight / (d.std * d.std);
      const Vector resid = tape.output + d.eps;
      loss += w * resid.squaredNorm();
      const Vector grad_out = (2.0 * w * inv_n) * resid;
      const Vector input_grad = mlp_param_vjp(params, tape, grad_out, g);
      accumulate_condition_grad(params, d.condition, input_grad, g);
    }
    chunk_grad[c] = std::move(g);
    chunk_loss[c] = loss;
  });

  DsmResult r;
  r.grad = Vector::Zero(params.values().size());
  for (std::size_t c = 0; c < chunks; ++c) {
    r.grad += chunk_grad[c];
    r.loss += chunk_loss[c];
  }
  r.loss *= inv_n;
  return r;
}

DsmResult dsm_loss(const NetworkParams& params, std::span<const TrainingExample> batch, const SdeSpec& sde, Rng& rng,
                   const DsmOptions& opts, std::size_t workers) {
  const std::vector<DsmDraw> draws = draw_dsm_batch(batch, sde, rng, opts);
  return dsm_loss(params, draws, workers);
}

TrainResult train(NetworkParams params, std::span<const TrainingExample> data, const SdeSpec& sde,
                  const TrainConfig& config) {
  TrainResult result;
  result.losses.reserve(config.steps);
  if (config.steps == 0) {
    result.params = std::move(params);
    return result;
  }
  if (data.empty()) throw ContractError("train: empty dataset");
  const OptimizerConfig& opt = config.optimizer;
  if (opt.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  for (const TrainingExample& ex : data) {
    if (ex.x0.size() != params.shape().data_dim) throw ContractError("train: sample dimension mismatch");
  }

  Rng rng(config.seed);
  Vector velocity = Vector::Zero(params.values().size());
  std::vector<TrainingExample> batch(opt.batch_size);
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (auto& slot : batch) slot = data[rng.below(data.size())];
    const DsmResult r = dsm_loss(params, batch, sde, rng, config.dsm, config.workers);
    if (!std::isfinite(r.loss) || !r.grad.allFinite()) {
      throw TrainingError("training diverged: non-finite loss at step " + std::to_string(step), step);
    }
    Vector g = r.grad;
    const double norm = g.norm();
    if (opt.clip_norm > 0.0 && norm > opt.clip_norm) g *= opt.clip_norm / norm;
    velocity = opt.momentum * velocity + g;
    params.values() -= opt.learning_rate * velocity;
    result.losses.push_back(r.loss);
    if (config.on_step) config.on_step(step + 1, params);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace flowlik
