#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "flowlik/errors.hpp"
#include "flowlik/flow.hpp"
#include "flowlik/random.hpp"
#include "flowlik/schedule.hpp"
#include "oracles.hpp"

using namespace flowlik;

namespace {

double beta_ref(double t) { return 0.05 + (20.0 - 0.05) * t; }
double int_beta_ref(double t) { return 0.05 * t + (20.0 - 0.05) * t * t / 2.0; }

std::shared_ptr<const ScoreField> unit_gaussian(Index d, SdeSpec sde = SdeSpec::vp()) {
  return std::make_shared<const ScoreField>(ScoreField::gaussian(Vector::Zero(d), Vector::Ones(d), std::move(sde)));
}

std::shared_ptr<const ScoreField> toy_gmm(SdeSpec sde = SdeSpec::vp()) {
  Matrix means(2, 2);
  means << -1.0, 0.5, 1.5, -0.5;
  Vector w(2);
  w << 0.4, 0.6;
  return std::make_shared<const ScoreField>(ScoreField::gmm(w, means, 0.3, std::move(sde)));
}

Vector draw_prior(const Prior& p, Rng& rng) {
  return p.mean + std::sqrt(p.variance) * rng.normal_vector(p.mean.size());
}

}  // namespace

TEST(FlowField, VpStationaryForUnitGaussian) {
  const FlowField f(SdeSpec::vp(), unit_gaussian(3), Condition::null());
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Vector x = 5.0 * rng.normal_vector(3);
    const double t = rng.uniform(0.0, 1.0);
    EXPECT_LE(f.eval(t, x).cwiseAbs().maxCoeff(), 1e-13 * (1.0 + x.cwiseAbs().maxCoeff()) * beta_ref(t));
  }
}

TEST(FlowField, VpAndMrvpRightHandSides) {
  Rng rng(2);
  const FlowField vp(SdeSpec::vp(), toy_gmm(), Condition::null());
  Vector mu(2);
  mu << 0.7, -0.3;
  const FlowField mr(SdeSpec::mrvp(Vector::Zero(2)), toy_gmm(SdeSpec::mrvp(Vector::Zero(2))),
                     Condition::embedding(mu));
  for (int i = 0; i < 50; ++i) {
    const Vector x = rng.normal_vector(2);
    const double t = rng.uniform(1e-5, 1.0);
    const double b = beta_ref(t);
    const Vector s_vp = score_eval(vp.score(), x, t, Condition::null());
    EXPECT_TRUE(vp.eval(t, x).isApprox(-0.5 * b * x - 0.5 * b * s_vp, 1e-12));
    const Vector s_mr = score_eval(mr.score(), x, t, Condition::embedding(mu));
    EXPECT_TRUE(mr.eval(t, x).isApprox(0.5 * ((mu - x) - s_mr) * b, 1e-12));
  }
  ASSERT_TRUE(mr.sde().condition_mean.has_value());
  EXPECT_EQ(*mr.sde().condition_mean, mu);
}

TEST(FlowField, GuidanceReplacesScore) {
  const auto gmm = toy_gmm();
  const GuidanceConfig g{7.0};
  const FlowField guided(SdeSpec::vp(), gmm, Condition::class_label(1), g);
  Vector x(2);
  x << 0.2, 0.1;
  const double t = 0.3;
  const double b = beta_ref(t);
  EXPECT_TRUE(guided.eval(t, x).isApprox(-0.5 * b * x - 0.5 * b * cfg_score(*gmm, x, t, Condition::class_label(1), g), 1e-12));
  EXPECT_EQ(guided.mode().kind, FieldModeKind::Guided);
  EXPECT_EQ(guided.mode().omega, 7.0);
  EXPECT_EQ(FlowField(SdeSpec::vp(), gmm, Condition::class_label(1)).mode().kind, FieldModeKind::Conditional);
  EXPECT_EQ(FlowField(SdeSpec::vp(), gmm, Condition::null()).mode().kind, FieldModeKind::Unconditional);
  EXPECT_THROW(FlowField(SdeSpec::vp(), gmm, Condition::null(), g), ContractError);
  EXPECT_THROW(FlowField(SdeSpec::vp(), gmm, Condition::class_label(0), GuidanceConfig{-1.0}), ConfigError);
}

TEST(FlowField, DdimSigmaMatchesRescaledVpFlow) {
  const auto gmm = toy_gmm();
  const FlowField vp(SdeSpec::vp(), gmm, Condition::null());
  const FlowField ve(SdeSpec::ddim_sigma(), gmm, Condition::null());
  Rng rng(3);
  const SolverConfig cfg = SolverConfig::rk45(1e-10, 1e-10);
  for (int i = 0; i < 5; ++i) {
    const Vector x_T = rng.normal_vector(2);
    const Vector vp_end = sample_ode(vp, x_T, cfg).x;
    const Vector ve_end = sample_ode(ve, x_T * std::exp(0.5 * int_beta_ref(1.0)), cfg).x;
    EXPECT_LE((ve_end * std::exp(-0.5 * int_beta_ref(1e-5)) - vp_end).cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_NEAR(ve.prior().variance, std::pow(ddim_sigma(NoiseSchedule{}, 1.0), 2) + 1.0, 1e-9);
}

TEST(FlowField, VjpMatchesFiniteDifferences) {
  Vector mu(2);
  mu << 0.5, 0.5;
  const FlowField fields[] = {
      FlowField(SdeSpec::vp(), toy_gmm(), Condition::null()),
      FlowField(SdeSpec::mrvp(mu), toy_gmm(SdeSpec::mrvp(mu)), Condition::null()),
      FlowField(SdeSpec::ddim_sigma(), toy_gmm(), Condition::null()),
      FlowField(SdeSpec::vp(), toy_gmm(), Condition::class_label(0), GuidanceConfig{3.0}),
  };
  Rng rng(4);
  for (const FlowField& f : fields) {
    for (int i = 0; i < 10; ++i) {
      const Vector x = rng.normal_vector(2);
      const double t = rng.uniform(0.05, 1.0);
      const Vector v = rng.normal_vector(2);
      const Matrix J = oracle::fd_jacobian([&](const Vector& y) { return f.eval(t, y); }, x, 1e-5);
      const Vector expect = J.transpose() * v;
      EXPECT_LE((f.vjp(t, x, v) - expect).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + expect.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(FlowField, RejectsMismatchedPieces) {
  EXPECT_THROW(FlowField(SdeSpec::mrvp(Vector::Zero(2)), toy_gmm(), Condition::null()), ConfigError);
  NoiseSchedule other;
  other.beta_T = 10.0;
  EXPECT_THROW(FlowField(SdeSpec::vp(other), toy_gmm(), Condition::null()), ConfigError);
  EXPECT_THROW(FlowField(SdeSpec::vp(), nullptr, Condition::null()), ConfigError);
  const FlowField f(SdeSpec::vp(), toy_gmm(), Condition::null());
  EXPECT_THROW(f.eval(1.5, Vector::Zero(2)), DomainError);
  EXPECT_THROW(f.eval(-0.1, Vector::Zero(2)), DomainError);
}

TEST(Sampling, EulerMaruyamaWithoutNoiseIsEuler) {
  Rng rng(5);
  const Vector x0 = Vector::Constant(2, 1.0);
  const Vector em = euler_maruyama([](double, const Vector& x) { return Vector(-2.0 * x); }, [](double) { return 0.0; },
                                   x0, 0.0, 1.0, 50, rng);
  const Vector ode = integrate([](double, const Vector& x) { return Vector(-2.0 * x); }, x0, 0.0, 1.0,
                               SolverConfig::euler(50)).x;
  EXPECT_TRUE(em.isApprox(ode, 1e-14));
  EXPECT_NEAR(em[0], std::pow(1.0 - 2.0 / 50.0, 50), 1e-14);
}

TEST(Sampling, ReverseSdeRecoversUnitGaussian) {
  const FlowField f(SdeSpec::vp(), unit_gaussian(1), Condition::null());
  const SolverConfig cfg = SolverConfig::euler(200);
  Rng prior(6);
  std::vector<double> xs;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    xs.push_back(sample_reverse_sde(f, draw_prior(f.prior(), prior), cfg, 1000 + i)[0]);
  }
  const auto m = oracle::moments(xs);
  EXPECT_LE(std::abs(m.mean), 3.0 * m.se_mean);
  EXPECT_LE(std::abs(m.var - 1.0), 3.0 * m.se_var);
}

TEST(Sampling, ReverseSdeIsDeterministicPerSeed) {
  const FlowField f(SdeSpec::vp(), toy_gmm(), Condition::null());
  const Vector x_T = Vector::Constant(2, 0.3);
  const SolverConfig cfg = SolverConfig::euler(100);
  EXPECT_EQ(sample_reverse_sde(f, x_T, cfg, 9), sample_reverse_sde(f, x_T, cfg, 9));
  EXPECT_NE(sample_reverse_sde(f, x_T, cfg, 9), sample_reverse_sde(f, x_T, cfg, 10));
  EXPECT_THROW(sample_reverse_sde(f, x_T, SolverConfig::rk45(1e-5, 1e-5), 9), ContractError);
}

TEST(Sampling, OdeOnStationaryFieldsIsIdentity) {
  Vector mu(2);
  mu << 1.0, -2.0;
  const FlowField vp(SdeSpec::vp(), unit_gaussian(2), Condition::null());
  const auto mr_score = std::make_shared<const ScoreField>(
      ScoreField::gaussian(mu, Vector::Ones(2), SdeSpec::mrvp(mu)));
  const FlowField mr(SdeSpec::mrvp(mu), mr_score, Condition::null());
  const SolverConfig cfg = SolverConfig::rk45(1e-6, 1e-6);
  Rng rng(7);
  std::vector<double> x0s, x1s;
  for (int i = 0; i < 10000; ++i) {
    const Vector x_T = draw_prior(mr.prior(), rng);
    const Vector x0 = sample_ode(mr, x_T, cfg).x;
    x0s.push_back(x0[0]);
    x1s.push_back(x0[1]);
    if (i < 20) {
      const Vector z = rng.normal_vector(2);
      EXPECT_LE((sample_ode(vp, z, cfg).x - z).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
  const auto m0 = oracle::moments(x0s);
  const auto m1 = oracle::moments(x1s);
  EXPECT_LE(std::abs(m0.mean - mu[0]), 3.0 * m0.se_mean);
  EXPECT_LE(std::abs(m1.mean - mu[1]), 3.0 * m1.se_mean);
  EXPECT_LE(std::abs(m0.var - 1.0), 3.0 * m0.se_var);
  EXPECT_LE(std::abs(m1.var - 1.0), 3.0 * m1.se_var);
}

TEST(Sampling, EulerAgreesWithRk45OnMixture) {
  const FlowField f(SdeSpec::vp(), toy_gmm(), Condition::null());
  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    const Vector x_T = rng.normal_vector(2);
    const Vector a = sample_ode(f, x_T, SolverConfig::euler(4000)).x;
    const Vector b = sample_ode(f, x_T, SolverConfig::rk45(1e-6, 1e-6)).x;
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(Reconstruct, AnalyticRoundTrip) {
  const FlowField f(SdeSpec::vp(), toy_gmm(), Condition::null());
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    const Vector x0 = rng.normal_vector(2);
    const Reconstruction r = reconstruct(f, x0, SolverConfig::rk45(1e-8, 1e-8));
    EXPECT_LE((r.x0 - x0).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_GT(r.nfe_forward, 0u);
    EXPECT_GT(r.nfe_reverse, 0u);
  }
}

TEST(Reconstruct, ErrorShrinksWithTolerance) {
  const FlowField f(SdeSpec::vp(), toy_gmm(), Condition::null());
  Rng rng(10);
  double prev = INFINITY;
  std::vector<Vector> xs;
  for (int i = 0; i < 10; ++i) xs.push_back(rng.normal_vector(2));
  for (double tol : {1e-3, 1e-5, 1e-7, 1e-9}) {
    double worst = 0.0;
    for (const Vector& x0 : xs) {
      worst = std::max(worst, (reconstruct(f, x0, SolverConfig::rk45(tol, tol)).x0 - x0).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst, prev);
    prev = worst;
  }
}

TEST(Reconstruct, ZeroFieldIsExact) {
  class Zero final : public VectorField {
   public:
    Index dim() const override { return 3; }
    Vector eval(double, const Vector& x) const override { return Vector::Zero(x.size()); }
    Vector vjp(double, const Vector& x, const Vector&) const override { return Vector::Zero(x.size()); }
  } zero;
  Vector x0(3);
  x0 << 0.1, 0.2, 0.3;
  EXPECT_EQ(reconstruct(zero, x0, 1.0, SolverConfig::rk45(1e-5, 1e-5), SolverConfig::euler(10)).x0, x0);
}
