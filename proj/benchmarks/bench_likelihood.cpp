#include <benchmark/benchmark.h>

#include <memory>

#include "flowlik/flow.hpp"
#include "flowlik/likelihood.hpp"
#include "flowlik/mlp.hpp"
#include "flowlik/random.hpp"

using namespace flowlik;

namespace {

FlowField mlp_field(Index dim) {
  MlpShape shape;
  shape.data_dim = dim;
  shape.hidden = {64, 64};
  auto params = std::make_shared<const NetworkParams>(NetworkParams::init(shape, 5));
  return FlowField(SdeSpec::vp(), std::make_shared<const ScoreField>(ScoreField::mlp(params, SdeSpec::vp())),
                   Condition::null());
}

void BM_DivergenceExact(benchmark::State& state) {
  const FlowField f = mlp_field(state.range(0));
  const Vector x = Vector::Constant(state.range(0), 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(divergence_exact(f, x, 0.5));
}
BENCHMARK(BM_DivergenceExact)->Arg(2)->Arg(16)->Arg(64);

void BM_DivergenceHutchinson(benchmark::State& state) {
  const FlowField f = mlp_field(state.range(0));
  const Vector x = Vector::Constant(state.range(0), 0.2);
  Rng rng(6);
  const Matrix probes = draw_probes(ProbeDistribution::Rademacher, state.range(0), 4, rng);
  for (auto _ : state) benchmark::DoNotOptimize(divergence_hutchinson(f, x, 0.5, probes));
}
BENCHMARK(BM_DivergenceHutchinson)->Arg(2)->Arg(16)->Arg(64);

void BM_LogLikelihoodGmm(benchmark::State& state) {
  Matrix means(2, 2);
  means << -2.0, 0.0, 2.0, 0.0;
  const FlowField f(SdeSpec::vp(),
                    std::make_shared<const ScoreField>(ScoreField::gmm(Vector::Constant(2, 0.5), means, 0.5, SdeSpec::vp())),
                    Condition::null());
  LikelihoodConfig cfg;
  cfg.solver = SolverConfig::rk45(1e-5, 1e-5);
  const Vector x = Vector::Constant(2, 0.7);
  for (auto _ : state) benchmark::DoNotOptimize(log_likelihood(f, x, cfg).logp());
}
BENCHMARK(BM_LogLikelihoodGmm)->Unit(benchmark::kMillisecond);

void BM_LogLikelihoodMlp(benchmark::State& state) {
  const FlowField f = mlp_field(8);
  LikelihoodConfig cfg;
  cfg.solver = SolverConfig::rk45(1e-4, 1e-4);
  if (state.range(0) > 0) cfg.divergence = TraceProbeConfig{ProbeDistribution::Rademacher, std::size_t(state.range(0)), 7};
  const Vector x = Vector::Constant(8, 0.4);
  for (auto _ : state) benchmark::DoNotOptimize(log_likelihood(f, x, cfg).logp());
}
BENCHMARK(BM_LogLikelihoodMlp)->Arg(0)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
