#include <benchmark/benchmark.h>

#include <memory>

#include "flowlik/mlp.hpp"
#include "flowlik/random.hpp"
#include "flowlik/score.hpp"

using namespace flowlik;

namespace {

ScoreField mixture(Index components, Index dim) {
  Rng rng(1);
  Matrix means(components, dim);
  for (Index k = 0; k < components; ++k) means.row(k) = 2.0 * rng.normal_vector(dim).transpose();
  return ScoreField::gmm(Vector::Constant(components, 1.0 / components), means, 0.5, SdeSpec::vp());
}

ScoreField network(int width, Index dim) {
  MlpShape shape;
  shape.data_dim = dim;
  shape.hidden = {width, width};
  return ScoreField::mlp(std::make_shared<const NetworkParams>(NetworkParams::init(shape, 2)), SdeSpec::vp());
}

void BM_GmmScore(benchmark::State& state) {
  const ScoreField f = mixture(state.range(0), 2);
  const Vector x = Vector::Constant(2, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(score_eval(f, x, 0.4, Condition::null()));
}
BENCHMARK(BM_GmmScore)->Arg(2)->Arg(16)->Arg(128);

void BM_MlpScore(benchmark::State& state) {
  const ScoreField f = network(static_cast<int>(state.range(0)), 2);
  const Vector x = Vector::Constant(2, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(score_eval(f, x, 0.4, Condition::null()));
}
BENCHMARK(BM_MlpScore)->Arg(16)->Arg(64)->Arg(256);

void BM_MlpVjp(benchmark::State& state) {
  const ScoreField f = network(static_cast<int>(state.range(0)), 2);
  const Vector x = Vector::Constant(2, 0.3);
  const Vector v = Vector::Ones(2);
  for (auto _ : state) benchmark::DoNotOptimize(score_vjp(f, x, 0.4, Condition::null(), v));
}
BENCHMARK(BM_MlpVjp)->Arg(16)->Arg(64)->Arg(256);

void BM_MlpVjpMany(benchmark::State& state) {
  const ScoreField f = network(64, 16);
  const Vector x = Vector::Constant(16, 0.3);
  Rng rng(3);
  Matrix probes(16, state.range(0));
  for (Index j = 0; j < probes.cols(); ++j) probes.col(j) = rng.rademacher_vector(16);
  for (auto _ : state) benchmark::DoNotOptimize(score_vjp_many(f, x, 0.4, Condition::null(), probes));
}
BENCHMARK(BM_MlpVjpMany)->Arg(1)->Arg(16)->Arg(64);

}  // namespace
