#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "flowlik/errors.hpp"
#include "flowlik/eval/blur.hpp"
#include "flowlik/eval/classify.hpp"
#include "flowlik/eval/rescore.hpp"
#include "flowlik/eval/significance.hpp"
#include "flowlik/eval/sweep.hpp"
#include "oracles.hpp"

using namespace flowlik;
using namespace flowlik::eval;

namespace {

LikelihoodConfig exact_cfg() {
  LikelihoodConfig c;
  c.solver = SolverConfig::rk45(1e-5, 1e-5);
  return c;
}

std::shared_ptr<const ScoreField> two_class(double sep) {
  Matrix means(2, 2);
  means << -sep, 0.0, sep, 0.0;
  return std::make_shared<const ScoreField>(ScoreField::gmm(Vector::Constant(2, 0.5), means, 1.0, SdeSpec::vp()));
}

FieldFactory factory(std::shared_ptr<const ScoreField> s) {
  return [s](const Condition& c) { return FlowField(SdeSpec::vp(), s, c); };
}

ClassificationTask class_task(double sep, std::size_t n, std::uint64_t seed) {
  ClassificationTask task;
  task.candidates = {Condition::class_label(0), Condition::class_label(1)};
  task.field = factory(two_class(sep));
  task.likelihood = exact_cfg();
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % 2;
    Vector x = rng.normal_vector(2);
    x[0] += k == 0 ? -sep : sep;
    task.samples.push_back({x, k});
  }
  return task;
}

// Hypotheses are the two class labels; base score is the noisy true class log-density.
NBestTask nbest_task(std::size_t n, double noise, std::uint64_t seed) {
  NBestTask task;
  const auto s = two_class(1.0);
  task.field = factory(s);
  task.likelihood = exact_cfg();
  Rng rng(seed);
  Matrix means(2, 2);
  means << -1.0, 0.0, 1.0, 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = rng.below(2);
    Vector x = rng.normal_vector(2);
    x[0] += k == 0 ? -1.0 : 1.0;
    NBestItem item{x, {}};
    for (std::size_t h = 0; h < 2; ++h) {
      const double truth = oracle::log_normal(x, means.row(static_cast<Index>(h)).transpose(), 1.0);
      item.hypotheses.push_back({Condition::class_label(h), truth + noise * rng.normal(), h == k ? 0u : 3u, 3});
    }
    task.items.push_back(std::move(item));
  }
  return task;
}

Matrix gauss_taps_ref(int size, double sigma) {
  const int r = size / 2;
  Matrix k(size, size);
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) k(i + r, j + r) = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
  return k / k.sum();
}

}  // namespace

TEST(Classify, WellSeparatedClasses) {
  const ClassificationReport r = classify(class_task(5.0, 200, 1));
  EXPECT_GE(r.accuracy, 0.95);
  EXPECT_TRUE(r.errors.empty());
  EXPECT_EQ(r.logp.rows(), 200);
  EXPECT_EQ(r.logp.cols(), 2);
}

TEST(Classify, AccuracyGrowsWithSeparation) {
  double prev = 0.0;
  for (double sep : {1.0, 3.0, 5.0}) {
    const double acc = classify(class_task(sep, 100, 2)).accuracy;
    EXPECT_GE(acc, prev);
    prev = acc;
  }
}

TEST(Classify, DegenerateCandidates) {
  ClassificationTask single = class_task(1.0, 10, 3);
  single.candidates = {Condition::class_label(0)};
  for (auto& s : single.samples) s.true_index = 0;
  EXPECT_EQ(classify(single).accuracy, 1.0);

  ClassificationTask same = class_task(1.0, 10, 4);
  same.candidates = {Condition::class_label(1), Condition::class_label(1), Condition::class_label(1)};
  const ClassificationReport r = classify(same);
  for (const auto& p : r.predictions) {
    ASSERT_TRUE(p.has_value());
    EXPECT_EQ(*p, 0u);
  }
}

TEST(Classify, PairErrorsAreRecorded) {
  ClassificationTask task = class_task(3.0, 6, 5);
  task.samples[2].x0[1] = std::nan("");
  const ClassificationReport r = classify(task);
  EXPECT_EQ(r.errors.size(), 2u);
  EXPECT_FALSE(r.predictions[2].has_value());
  EXPECT_TRUE(std::isnan(r.logp(2, 0)));
  EXPECT_TRUE(r.predictions[1].has_value());
  EXPECT_EQ(r.accuracy, static_cast<double>(r.correct) / 6.0);
}

TEST(Classify, Validation) {
  ClassificationTask task = class_task(3.0, 4, 6);
  task.samples[0].true_index = 2;
  EXPECT_THROW(classify(task), ContractError);
  task = class_task(3.0, 4, 6);
  task.candidates.clear();
  EXPECT_THROW(classify(task), ContractError);
}

TEST(Classify, WorkersDoNotChangeResults) {
  const ClassificationTask task = class_task(2.0, 24, 7);
  const ClassificationReport a = classify(task, 1);
  const ClassificationReport b = classify(task, 5);
  EXPECT_TRUE(a.logp == b.logp);
  EXPECT_EQ(a.predictions, b.predictions);
}

TEST(Rescore, LambdaOneIsBaseSelection) {
  const NBestTask task = nbest_task(40, 2.0, 8);
  const RescoreReport r = rescore(task, RescoreWeights{1.0});
  const Selection base = select_by_base_score(task);
  EXPECT_EQ(r.strategy.selected, base.selected);
  EXPECT_EQ(r.strategy.error_rate, base.error_rate);
}

TEST(Rescore, LambdaZeroIsLikelihoodArgmax) {
  const NBestTask task = nbest_task(40, 2.0, 9);
  const HypothesisScores scores = score_hypotheses(task);
  const RescoreReport r = rescore(task, scores, RescoreWeights{0.0});
  for (std::size_t i = 0; i < task.items.size(); ++i) {
    const auto& lp = scores.logp[i];
    const std::size_t best = lp[1] > lp[0] ? 1 : 0;
    EXPECT_EQ(r.strategy.selected[i], best);
  }
}

TEST(Rescore, BaselinesBoundEveryStrategy) {
  for (std::uint64_t seed : {10u, 11u, 12u}) {
    const NBestTask task = nbest_task(30, 3.0, seed);
    const HypothesisScores scores = score_hypotheses(task, 3);
    for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const RescoreReport r = rescore(task, scores, RescoreWeights{lambda});
      EXPECT_LE(r.oracle_best.error_rate, r.strategy.error_rate);
      EXPECT_LE(r.strategy.error_rate, r.oracle_worst.error_rate);
      EXPECT_LE(r.oracle_best.error_rate, r.random.error_rate);
      EXPECT_LE(r.random.error_rate, r.oracle_worst.error_rate);
    }
    const RescoreReport r = rescore(task, scores, RescoreWeights{0.0});
    EXPECT_EQ(r.oracle_best.error_rate, 0.0);
    EXPECT_EQ(r.oracle_worst.error_rate, 1.0);
    EXPECT_DOUBLE_EQ(r.random.error_rate, 0.5);
  }
}

TEST(Rescore, Validation) {
  NBestTask task = nbest_task(3, 1.0, 13);
  EXPECT_THROW(rescore(task, RescoreWeights{1.5}), ConfigError);
  EXPECT_THROW(rescore(task, RescoreWeights{-0.1}), ConfigError);
  task.items[1].hypotheses.pop_back();
  EXPECT_THROW(rescore(task, RescoreWeights{0.5}), ContractError);
  task = nbest_task(3, 1.0, 13);
  task.items[0].hypotheses[0].token_count = 0;
  EXPECT_THROW(rescore(task, RescoreWeights{0.5}), ContractError);
}

TEST(Rescore, Deterministic) {
  const NBestTask task = nbest_task(20, 1.0, 14);
  EXPECT_EQ(rescore(task, RescoreWeights{0.5}, 1).strategy.selected,
            rescore(task, RescoreWeights{0.5}, 4).strategy.selected);
}

TEST(Sweep, TimesIncludeEndpoints) {
  const auto ts = sweep_times(8, 1.0, 1e-5);
  ASSERT_EQ(ts.size(), 8u);
  EXPECT_EQ(ts.front(), 1.0);
  EXPECT_EQ(ts.back(), 1e-5);
  for (std::size_t k = 1; k + 1 < ts.size(); ++k) EXPECT_NEAR(ts[k], 1.0 - k / 7.0, 1e-15);
  EXPECT_THROW(sweep_times(1, 1.0, 1e-5), ConfigError);
}

TEST(Sweep, StationaryFieldGivesConstantBpd) {
  const FlowField f(SdeSpec::vp(),
                    std::make_shared<const ScoreField>(ScoreField::gaussian(Vector::Zero(2), Vector::Ones(2), SdeSpec::vp())),
                    Condition::null());
  SweepConfig cfg;
  cfg.num_samples = 16;
  cfg.likelihood = exact_cfg();
  const SweepResult r = sweep_time(f, cfg);
  ASSERT_EQ(r.rows.size(), 8u);
  for (Index i = 0; i < r.bpd.rows(); ++i) {
    for (Index k = 1; k < r.bpd.cols(); ++k) EXPECT_NEAR(r.bpd(i, k), r.bpd(i, 0), 1e-8);
  }
  EXPECT_TRUE(bpd_non_increasing(r, 2.0));
  SweepConfig par = cfg;
  par.workers = 4;
  EXPECT_TRUE(sweep_time(f, par).bpd == r.bpd);
}

TEST(Sweep, NonIncreasingCheckUsesStandardErrors) {
  SweepResult r;
  r.rows = {{1.0, 3.0, 0.1, 10}, {0.5, 3.1, 0.1, 10}, {0.0, 1.0, 0.1, 10}};
  EXPECT_TRUE(bpd_non_increasing(r, 2.0));
  r.rows[1].mean_bpd = 3.5;
  EXPECT_FALSE(bpd_non_increasing(r, 2.0));
}

TEST(Blur, TapsAreNormalisedGaussian) {
  const Matrix taps = BlurKernel{}.taps();
  EXPECT_NEAR(taps.sum(), 1.0, 1e-12);
  EXPECT_TRUE(taps.isApprox(taps.transpose(), 0.0));
  EXPECT_TRUE(taps.isApprox(taps.rowwise().reverse().eval(), 0.0));
  EXPECT_LE((taps - gauss_taps_ref(5, 1.0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW((BlurKernel{4, 1.0}.taps()), ConfigError);
  EXPECT_THROW((BlurKernel{5, 0.0}.taps()), ConfigError);
}

TEST(Blur, ImpulseConstantAndTranslation) {
  Matrix impulse = Matrix::Zero(9, 9);
  impulse(4, 4) = 1.0;
  const Matrix out = blur(impulse, BlurKernel{});
  EXPECT_LE((out.block(2, 2, 5, 5) - gauss_taps_ref(5, 1.0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(out.sum(), 1.0, 1e-12);

  const Matrix c = Matrix::Constant(6, 7, 2.5);
  EXPECT_LE((blur(c, BlurKernel{}) - c).cwiseAbs().maxCoeff(), 1e-14);

  Rng rng(15);
  Matrix g(12, 12);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j) g(i, j) = rng.normal();
  Matrix shifted = Matrix::Zero(12, 12);
  shifted.block(1, 1, 11, 11) = g.block(0, 0, 11, 11);
  const Matrix a = blur(g, BlurKernel{});
  const Matrix b = blur(shifted, BlurKernel{});
  // Interior cells far from every border agree after the shift.
  EXPECT_LE((b.block(4, 4, 5, 5) - a.block(3, 3, 5, 5)).cwiseAbs().maxCoeff(), 1e-14);

  EXPECT_THROW(blur(Matrix::Zero(2, 8), BlurKernel{}), ContractError);
}

TEST(Blur, CosineSimilarity) {
  Matrix a(2, 2), b(2, 2);
  a << 1, 0, 0, 0;
  b << 0, 1, 0, 0;
  EXPECT_EQ(cosine_similarity(a, a), 1.0);
  EXPECT_EQ(cosine_similarity(a, b), 0.0);
  EXPECT_NEAR(cosine_similarity(a, -2.0 * a), -1.0, 1e-15);
  EXPECT_THROW(cosine_similarity(a, Matrix::Zero(3, 2)), ContractError);
}

TEST(BlurAdapt, AnalyticFieldMovesTowardCleanData) {
  const Index n = 6;
  Matrix clean(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) clean(i, j) = std::exp(-((i - 2.5) * (i - 2.5) + (j - 2.5) * (j - 2.5)) / 4.0);
  const Vector mean = flatten_grid(clean);
  const auto score = std::make_shared<const ScoreField>(
      ScoreField::gaussian(mean, Vector::Constant(n * n, 0.05), SdeSpec::mrvp(Vector::Zero(n * n))));
  const auto field = [&](const Condition& c) { return FlowField(SdeSpec::mrvp(Vector::Zero(n * n)), score, c); };

  Matrix striped = clean;
  for (Index j = 0; j < n; j += 2) striped.col(j).array() += 0.5;
  AdaptConfig cfg;
  cfg.forward = SolverConfig::euler(10, 1e-2);
  cfg.reverse = SolverConfig::euler(10, 1e-2);
  cfg.likelihood = exact_cfg();
  cfg.likelihood.solver.t_min = 1e-2;
  const AdaptResult r = blur_adapt(striped, field, clean, cfg);
  EXPECT_TRUE(r.blurred.isApprox(blur(striped, BlurKernel{}), 0.0));
  EXPECT_LT(r.output.bpd(), r.input.bpd());
  EXPECT_LT((r.adapted - clean).norm(), (striped - clean).norm());
  EXPECT_NEAR(r.input_similarity, cosine_similarity(striped, clean), 1e-15);
  EXPECT_EQ(r.input.shape(), (std::vector<std::size_t>{6, 6}));

  const Matrix flat = Matrix::Constant(n, n, 0.3);
  EXPECT_LE((blur_adapt(flat, field, clean, cfg).blurred - flat).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Significance, DegenerateCases) {
  const std::vector<double> a(50, 1.0), b(50, 0.0);
  EXPECT_EQ(matched_pairs_test(a, a), 1.0);
  EXPECT_LT(matched_pairs_test(a, b), 1e-3);
  EXPECT_THROW(matched_pairs_test(a, std::vector<double>(49, 0.0)), ContractError);
}

TEST(Significance, NormalApproximation) {
  // Differences 1,2,...,10: mean 5.5, sd sqrt(55/6).
  std::vector<double> a, b(10, 0.0);
  for (int i = 1; i <= 10; ++i) a.push_back(i);
  const double z = 5.5 / (std::sqrt(55.0 / 6.0) / std::sqrt(10.0));
  EXPECT_NEAR(matched_pairs_test(a, b), std::erfc(z / std::sqrt(2.0)), 1e-14);
}

TEST(Significance, CalibratedUnderNull) {
  std::mt19937_64 gen(16);
  std::bernoulli_distribution err(0.3);
  int rejections = 0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> a(200), b(200);
    for (int i = 0; i < 200; ++i) {
      a[i] = err(gen);
      b[i] = err(gen);
    }
    if (matched_pairs_test(a, b) < 0.05) ++rejections;
  }
  const double rate = static_cast<double>(rejections) / reps;
  const double sd = std::sqrt(0.05 * 0.95 / reps);
  EXPECT_NEAR(rate, 0.05, 3.0 * sd);
}
