#include <benchmark/benchmark.h>

#include <vector>

#include "flowlik/mlp.hpp"
#include "flowlik/random.hpp"
#include "flowlik/training.hpp"

using namespace flowlik;

namespace {

std::vector<TrainingExample> toy_data(std::size_t n) {
  Rng rng(8);
  std::vector<TrainingExample> data;
  for (std::size_t i = 0; i < n; ++i) data.push_back({rng.normal_vector(2), Condition::null()});
  return data;
}

void BM_DsmLossGrad(benchmark::State& state) {
  MlpShape shape;
  shape.data_dim = 2;
  shape.hidden = {64, 64};
  const NetworkParams params = NetworkParams::init(shape, 9);
  const auto data = toy_data(std::size_t(state.range(0)));
  Rng rng(10);
  const auto draws = draw_dsm_batch(data, SdeSpec::vp(), rng, DsmOptions{});
  for (auto _ : state) benchmark::DoNotOptimize(dsm_loss(params, draws).loss);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DsmLossGrad)->Arg(16)->Arg(64)->Arg(256);

void BM_TrainSteps(benchmark::State& state) {
  MlpShape shape;
  shape.data_dim = 2;
  shape.hidden = {32, 32};
  const auto data = toy_data(512);
  TrainConfig cfg;
  cfg.steps = 100;
  cfg.seed = 11;
  for (auto _ : state) benchmark::DoNotOptimize(train(NetworkParams::init(shape, 12), data, SdeSpec::vp(), cfg));
}
BENCHMARK(BM_TrainSteps)->Unit(benchmark::kMillisecond);

}  // namespace
