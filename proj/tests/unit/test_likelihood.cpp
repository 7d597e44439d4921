#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "flowlik/errors.hpp"
#include "flowlik/likelihood.hpp"
#include "flowlik/mlp.hpp"
#include "oracles.hpp"

using namespace flowlik;

namespace {

constexpr double kLogNormal0 = -0.91893853320467274;  // -log(2 pi) / 2

class Linear final : public VectorField {
 public:
  explicit Linear(Matrix a) : a_(std::move(a)) {}
  Index dim() const override { return a_.rows(); }
  Vector eval(double, const Vector& x) const override { return a_ * x; }
  Vector vjp(double, const Vector&, const Vector& v) const override { return a_.transpose() * v; }

 private:
  Matrix a_;
};

std::shared_ptr<const ScoreField> unit_gaussian(Index d) {
  return std::make_shared<const ScoreField>(ScoreField::gaussian(Vector::Zero(d), Vector::Ones(d), SdeSpec::vp()));
}

Matrix pm3_means() {
  Matrix m(2, 2);
  m << -3.0, 0.0, 3.0, 0.0;
  return m;
}

FlowField pm3_field() {
  return FlowField(SdeSpec::vp(),
                   std::make_shared<const ScoreField>(ScoreField::gmm(Vector::Constant(2, 0.5), pm3_means(), 1.0, SdeSpec::vp())),
                   Condition::null());
}

LikelihoodConfig exact_cfg() {
  LikelihoodConfig c;
  c.solver = SolverConfig::rk45(1e-5, 1e-5);
  return c;
}

LikelihoodConfig probe_cfg(std::size_t n, std::uint64_t seed, ProbeDistribution dist = ProbeDistribution::Rademacher) {
  LikelihoodConfig c = exact_cfg();
  c.divergence = TraceProbeConfig{dist, n, seed};
  return c;
}

}  // namespace

TEST(Divergence, ExactLinearTrace) {
  Matrix a(2, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  EXPECT_DOUBLE_EQ(divergence_exact(Linear(a), Vector::Zero(2), 0.5), 5.0);
  const FlowField f(SdeSpec::vp(), unit_gaussian(3), Condition::null());
  EXPECT_LE(std::abs(divergence_exact(f, Vector::Constant(3, 0.7), 0.4)), 1e-12);
}

TEST(Divergence, ExactGuardedByDimension) {
  EXPECT_NO_THROW(divergence_exact(Linear(Matrix::Identity(64, 64)), Vector::Zero(64), 0.5));
  EXPECT_THROW(divergence_exact(Linear(Matrix::Identity(65, 65)), Vector::Zero(65), 0.5), ContractError);
}

TEST(Divergence, MlpFieldMatchesFiniteDifferences) {
  MlpShape shape;
  shape.data_dim = 3;
  shape.hidden = {16, 16};
  auto net = std::make_shared<const NetworkParams>(NetworkParams::init(shape, 3));
  const FlowField f(SdeSpec::vp(), std::make_shared<const ScoreField>(ScoreField::mlp(net, SdeSpec::vp())),
                    Condition::null());
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const Vector x = rng.normal_vector(3);
    const double t = rng.uniform(0.05, 1.0);
    const Matrix J = oracle::fd_jacobian([&](const Vector& y) { return f.eval(t, y); }, x, 1e-5);
    EXPECT_NEAR(divergence_exact(f, x, t), J.trace(), 1e-4);
  }
}

TEST(Hutchinson, IdentityAndDiagonalAreExactUnderRademacher) {
  Rng rng(5);
  const Matrix p5 = draw_probes(ProbeDistribution::Rademacher, 5, 7, rng);
  EXPECT_EQ(divergence_hutchinson(Linear(Matrix::Identity(5, 5)), Vector::Zero(5), 0.5, p5), 5.0);
  const Vector diag = (Vector(3) << 1.0, 2.0, 3.0).finished();
  const Matrix p3 = draw_probes(ProbeDistribution::Rademacher, 3, 50, rng);
  const Vector terms = hutchinson_terms(Linear(diag.asDiagonal()), Vector::Zero(3), 0.5, p3);
  ASSERT_EQ(terms.size(), 50);
  for (Index k = 0; k < terms.size(); ++k) EXPECT_EQ(terms[k], 6.0);
}

TEST(Hutchinson, DenseGaussianWithinThreeSe) {
  Rng rng(6);
  Matrix a(8, 8);
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) a(i, j) = rng.normal();
  const Linear f(a);
  const double exact = divergence_exact(f, Vector::Zero(8), 0.5);
  EXPECT_NEAR(exact, a.trace(), 1e-12);
  const Vector g = hutchinson_terms(f, Vector::Zero(8), 0.5, draw_probes(ProbeDistribution::Gaussian, 8, 10000, rng));
  const Vector r = hutchinson_terms(f, Vector::Zero(8), 0.5, draw_probes(ProbeDistribution::Rademacher, 8, 10000, rng));
  const auto mg = oracle::moments(std::vector<double>(g.data(), g.data() + g.size()));
  const auto mr = oracle::moments(std::vector<double>(r.data(), r.data() + r.size()));
  EXPECT_LE(std::abs(mg.mean - exact), 3.0 * mg.se_mean);
  EXPECT_LE(std::abs(mr.mean - exact), 3.0 * mr.se_mean);
  EXPECT_LE(mr.var, mg.var);
}

TEST(Hutchinson, UnbiasedOverIndependentProbeSets) {
  const FlowField f = pm3_field();
  Vector x(2);
  x << 0.4, -0.9;
  const double t = 0.2;
  const double exact = divergence_exact(f, x, t);
  std::vector<double> est;
  for (std::uint64_t i = 0; i < 200; ++i) {
    est.push_back(divergence_hutchinson(f, x, t, TraceProbeConfig{ProbeDistribution::Gaussian, 4, 77}, i));
  }
  const auto m = oracle::moments(est);
  EXPECT_LE(std::abs(m.mean - exact), 3.0 * m.se_mean);
}

TEST(Hutchinson, ProbesAreDeterministicPerStream) {
  const TraceProbeConfig cfg{ProbeDistribution::Rademacher, 64, 11};
  const Matrix a = draw_probes(cfg, 4, 3);
  EXPECT_EQ(a, draw_probes(cfg, 4, 3));
  EXPECT_NE(a, draw_probes(cfg, 4, 4));
  EXPECT_TRUE((a.array().abs() == 1.0).all());
  const double frac = (a.array() > 0.0).cast<double>().mean();
  EXPECT_NEAR(frac, 0.5, 3.0 * 0.5 / 16.0);
  EXPECT_THROW(draw_probes(TraceProbeConfig{ProbeDistribution::Gaussian, 0, 1}, 4, 0), ContractError);
  EXPECT_THROW(divergence_hutchinson(Linear(Matrix::Identity(2, 2)), Vector::Zero(2), 0.5, Matrix(2, 0)), ContractError);
}

TEST(Bpd, Conversions) {
  const std::vector<std::size_t> s44{4, 4};
  EXPECT_EQ(bpd(0.0, s44), 0.0);
  EXPECT_NEAR(bpd(-16.0 * std::numbers::ln2, s44), 1.0, 1e-15);
  const std::vector<std::size_t> s1{1};
  EXPECT_NEAR(bpd(kLogNormal0, s1), 0.91893853320467274 * std::numbers::log2e, 1e-15);
  EXPECT_NEAR(bpd(kLogNormal0, s1), 1.3257480647361593, 1e-12);
  EXPECT_THROW(bpd(0.0, std::vector<std::size_t>{}), ContractError);
  EXPECT_THROW(bpd(0.0, std::vector<std::size_t>{2, 0}), ContractError);
}

TEST(LogLikelihood, UnitGaussianIsNearExact) {
  const FlowField f(SdeSpec::vp(), unit_gaussian(1), Condition::null());
  const LikelihoodResult r = log_likelihood(f, Vector::Zero(1), exact_cfg());
  EXPECT_NEAR(r.logp(), kLogNormal0, 1e-2);
  EXPECT_NEAR(r.logp(), kLogNormal0, 1e-9);
  EXPECT_EQ(r.logp(), r.prior_logp() + r.div_integral());
  EXPECT_DOUBLE_EQ(r.bpd(), -r.logp() * std::numbers::log2e);
  EXPECT_EQ(r.field_mode().kind, FieldModeKind::Unconditional);
  EXPECT_EQ(r.num_probes(), 0u);
  EXPECT_EQ(r.t_start(), 1e-5);
}

TEST(LogLikelihood, MrvpTranslation) {
  Vector mu(1);
  mu << 2.5;
  const auto score = std::make_shared<const ScoreField>(ScoreField::gaussian(mu, Vector::Ones(1), SdeSpec::mrvp(mu)));
  const FlowField f(SdeSpec::mrvp(mu), score, Condition::null());
  EXPECT_NEAR(log_likelihood(f, mu, exact_cfg()).logp(), kLogNormal0, 1e-2);
  const FlowField g(SdeSpec::mrvp(Vector::Zero(1)), score, Condition::embedding(mu));
  EXPECT_NEAR(log_likelihood(g, mu, exact_cfg()).logp(), kLogNormal0, 1e-2);
}

TEST(LogLikelihood, MixtureMatchesClosedForm) {
  const FlowField f = pm3_field();
  Rng rng(12);
  double total = 0.0;
  for (int i = 0; i < 20; ++i) {
    Vector x = rng.normal_vector(2);
    x[0] += i % 2 == 0 ? 3.0 : -3.0;
    total += std::abs(log_likelihood(f, x, exact_cfg()).logp() -
                      oracle::log_gmm(x, Vector::Constant(2, 0.5), pm3_means(), 1.0));
  }
  EXPECT_LE(total / 20.0, 2e-2);
}

TEST(LogLikelihood, HutchinsonAgreesWithExact) {
  // Means off-axis so the Jacobian is not diagonal and Rademacher probes carry variance too.
  Matrix means(2, 2);
  means << -2.0, -1.5, 2.0, 1.0;
  const FlowField f(SdeSpec::vp(),
                    std::make_shared<const ScoreField>(ScoreField::gmm(Vector::Constant(2, 0.5), means, 0.5, SdeSpec::vp())),
                    Condition::null());
  Vector x(2);
  x << 0.5, 0.5;
  const double exact = log_likelihood(f, x, exact_cfg()).logp();
  for (ProbeDistribution dist : {ProbeDistribution::Rademacher, ProbeDistribution::Gaussian}) {
    // Single-probe runs give the per-probe spread; the augmented integral is linear in the probe terms.
    std::vector<double> single;
    for (std::uint64_t s = 0; s < 100; ++s) single.push_back(log_likelihood(f, x, probe_cfg(1, 1000 + s, dist)).logp());
    const double sd1 = std::sqrt(oracle::moments(single).var);
    ASSERT_GT(sd1, 1e-3);
    const double many = log_likelihood(f, x, probe_cfg(1000, 5, dist)).logp();
    EXPECT_LE(std::abs(many - exact), 3.0 * sd1 / std::sqrt(1000.0));
    const LikelihoodResult r64 = log_likelihood(f, x, probe_cfg(64, 5, dist));
    EXPECT_EQ(r64.num_probes(), 64u);
    EXPECT_EQ(r64.seed(), 5u);
    EXPECT_LE(std::abs(r64.logp() - exact), 3.0 * sd1 / 8.0);
  }
}

TEST(LogLikelihoodAtTime, Endpoints) {
  const FlowField f = pm3_field();
  Vector x(2);
  x << 1.0, -1.0;
  const LikelihoodConfig cfg = exact_cfg();
  const LikelihoodResult at_T = log_likelihood_at_time(f, x, 1.0, cfg);
  EXPECT_EQ(at_T.div_integral(), 0.0);
  EXPECT_EQ(at_T.logp(), prior_logp(f.prior(), x));
  EXPECT_EQ(at_T.nfe(), 0u);
  EXPECT_EQ(log_likelihood_at_time(f, x, 1e-5, cfg).logp(), log_likelihood(f, x, cfg).logp());
  EXPECT_THROW(log_likelihood_at_time(f, x, 1e-6, cfg), DomainError);
  EXPECT_THROW(log_likelihood_at_time(f, x, 1.1, cfg), DomainError);
}

TEST(LogLikelihoodAtTime, StationaryGaussian) {
  const FlowField f(SdeSpec::vp(), unit_gaussian(1), Condition::null());
  for (double t : {1e-5, 0.1, 0.5, 0.9, 1.0}) {
    EXPECT_NEAR(log_likelihood_at_time(f, Vector::Zero(1), t, exact_cfg()).logp(), kLogNormal0, 1e-9);
  }
}

TEST(LogLikelihood, ShapeAndDequantization) {
  const FlowField f(SdeSpec::vp(), unit_gaussian(4), Condition::null());
  LikelihoodConfig cfg = exact_cfg();
  cfg.shape = {2, 2};
  const LikelihoodResult base = log_likelihood(f, Vector::Zero(4), cfg);
  EXPECT_NEAR(base.bpd(), -base.logp() * std::numbers::log2e / 4.0, 1e-15);
  cfg.dequantization_bins = 256.0;
  const LikelihoodResult dq = log_likelihood(f, Vector::Zero(4), cfg);
  EXPECT_NEAR(dq.logp(), base.logp() - 4.0 * std::log(256.0), 1e-12);
  cfg.dequantization_bins = 0.5;
  EXPECT_THROW(log_likelihood(f, Vector::Zero(4), cfg), ConfigError);
  cfg.dequantization_bins.reset();
  cfg.shape = {3};
  EXPECT_THROW(log_likelihood(f, Vector::Zero(4), cfg), ContractError);
  cfg.shape.clear();
  EXPECT_THROW(log_likelihood(f, Vector::Zero(3), cfg), ContractError);
  Vector bad = Vector::Zero(4);
  bad[1] = std::nan("");
  EXPECT_THROW(log_likelihood(f, bad, cfg), ContractError);
}

TEST(LogLikelihood, GuidedModeIsReported) {
  const auto score = std::make_shared<const ScoreField>(
      ScoreField::gmm(Vector::Constant(2, 0.5), pm3_means(), 1.0, SdeSpec::vp()));
  const FlowField f(SdeSpec::vp(), score, Condition::class_label(1), GuidanceConfig{2.0});
  const LikelihoodResult r = log_likelihood(f, Vector::Zero(2), exact_cfg());
  EXPECT_EQ(r.field_mode().kind, FieldModeKind::Guided);
  EXPECT_EQ(r.field_mode().omega, 2.0);
  EXPECT_TRUE(std::isfinite(r.logp()));
}

TEST(LogLikelihoodBatch, WorkersAgreeAndErrorsAreCollected) {
  std::vector<Vector> xs;
  Rng rng(20);
  for (int i = 0; i < 12; ++i) xs.push_back(rng.normal_vector(2));
  xs[5][0] = std::nan("");
  const auto field_for = [](std::size_t) { return pm3_field(); };
  const LikelihoodConfig cfg = probe_cfg(16, 3);
  const auto a = log_likelihood_batch(field_for, xs, cfg, 1);
  const auto b = log_likelihood_batch(field_for, xs, cfg, 4);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sample_id, i);
    EXPECT_EQ(a[i].result.has_value(), i != 5);
    EXPECT_EQ(b[i].result.has_value(), i != 5);
    if (a[i].result) EXPECT_EQ(a[i].result->logp(), b[i].result->logp());
  }
  EXPECT_FALSE(a[5].error.empty());
  // Sample i uses probe stream i regardless of batch position.
  EXPECT_EQ(a[7].result->logp(), log_likelihood(pm3_field(), xs[7], cfg, 7).logp());

  std::ostringstream ca, cb;
  write_likelihood_csv(ca, a);
  write_likelihood_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  const std::string csv = ca.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample_id,t,logp,prior_logp,div_integral,bpd,nfe,field_mode,num_probes,seed");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
}
