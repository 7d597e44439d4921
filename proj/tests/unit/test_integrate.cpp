#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "flowlik/errors.hpp"
#include "flowlik/integrate.hpp"

using namespace flowlik;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

OdeRhs decay() {
  return [](double, const Vector& x) { return Vector(-x); };
}

double exp_error(double tol) {
  const auto r = integrate(decay(), vec({1.0}), 0.0, 1.0, SolverConfig::rk45(tol, tol));
  return std::abs(r.x[0] - std::exp(-1.0));
}

}  // namespace

TEST(Integrate, ZeroRhsKeepsState) {
  const OdeRhs zero = [](double, const Vector& x) { return Vector(Vector::Zero(x.size())); };
  const Vector x = vec({0.3, -1.7, 2.0});
  EXPECT_EQ(integrate(zero, x, 0.1, 0.9, SolverConfig::rk45(1e-6, 1e-6)).x, x);
  EXPECT_EQ(integrate(zero, x, 0.9, 0.1, SolverConfig::euler(17)).x, x);
}

TEST(Integrate, ExponentialDecay) {
  const auto r = integrate(decay(), vec({1.0}), 0.0, 1.0, SolverConfig::rk45(1e-6, 1e-6));
  EXPECT_LE(std::abs(r.x[0] - 0.36787944117144233), 1e-6 * 10);
  const auto back = integrate(decay(), r.x, 1.0, 0.0, SolverConfig::rk45(1e-9, 1e-9));
  EXPECT_NEAR(back.x[0], 1.0, 1e-7);
}

TEST(Integrate, DiagonalLinearSystem) {
  const OdeRhs rhs = [](double, const Vector& x) { return vec({x[0], -2.0 * x[1]}); };
  const Vector x0 = vec({1.5, -0.5});
  const auto r = integrate(rhs, x0, 0.0, 0.5, SolverConfig::rk45(1e-8, 1e-8));
  EXPECT_NEAR(r.x[0], 1.5 * std::exp(0.5), 1e-7);
  EXPECT_NEAR(r.x[1], -0.5 * std::exp(-1.0), 1e-7);
}

TEST(Integrate, EulerIsFirstOrder) {
  auto err = [](std::size_t n) {
    return std::abs(integrate(decay(), vec({1.0}), 0.0, 1.0, SolverConfig::euler(n)).x[0] - std::exp(-1.0));
  };
  const double ratio = err(1000) / err(2000);
  EXPECT_NEAR(ratio, 2.0, 0.05);
  // Uniform steps: x_n = (1 - h)^n exactly.
  EXPECT_NEAR(integrate(decay(), vec({1.0}), 0.0, 1.0, SolverConfig::euler(10)).x[0], std::pow(0.9, 10), 1e-15);
}

TEST(Integrate, Rk45HalvingToleranceQuartersError) {
  for (double tol : {1e-5, 1e-6, 1e-7}) {
    const double coarse = exp_error(tol);
    const double fine = exp_error(tol / 2.0);
    EXPECT_GE(coarse / fine, 4.0) << "tol " << tol << ": error " << coarse << " -> " << fine;
  }
}

TEST(Integrate, Rk45ErrorShrinksWithTolerance) {
  double prev = exp_error(1e-4);
  for (double tol : {1e-6, 1e-8, 1e-10}) {
    const double e = exp_error(tol);
    EXPECT_LT(e, prev);
    EXPECT_LE(e, 10.0 * tol);
    prev = e;
  }
}

TEST(Integrate, NfeAccounting) {
  const auto r = integrate(decay(), vec({1.0}), 0.0, 1.0, SolverConfig::rk45(1e-8, 1e-8));
  EXPECT_EQ(r.trajectory.nfe, 1 + 6 * (r.trajectory.accepted + r.trajectory.rejected));

  // A jump in the RHS forces rejected steps.
  const OdeRhs jump = [](double t, const Vector& x) { return Vector(Vector::Constant(x.size(), t < 0.5 ? 0.0 : 100.0 * std::sin(40.0 * t))); };
  const auto j = integrate(jump, vec({0.0}), 0.0, 1.0, SolverConfig::rk45(1e-8, 1e-8));
  EXPECT_GT(j.trajectory.rejected, 0u);
  EXPECT_EQ(j.trajectory.nfe, 1 + 6 * (j.trajectory.accepted + j.trajectory.rejected));

  const auto e = integrate(decay(), vec({1.0}), 1.0, 0.0, SolverConfig::euler(37));
  EXPECT_EQ(e.trajectory.nfe, 37u);
  EXPECT_EQ(e.trajectory.accepted, 37u);
}

TEST(Integrate, CheckpointsAreHitExactlyAndMonotone) {
  IntegrateOptions opts;
  opts.checkpoint_times = {0.7, 0.25, 0.5};
  for (const SolverConfig& cfg : {SolverConfig::rk45(1e-9, 1e-9), SolverConfig::euler(4000)}) {
    const auto r = integrate(decay(), vec({1.0}), 1.0, 0.0, cfg, opts);
    const auto& cps = r.trajectory.checkpoints;
    ASSERT_EQ(cps.size(), 5u);
    const double expect_t[] = {1.0, 0.7, 0.5, 0.25, 0.0};
    for (std::size_t i = 0; i < cps.size(); ++i) {
      EXPECT_EQ(cps[i].t, expect_t[i]);
      EXPECT_NEAR(cps[i].x[0], std::exp(1.0 - cps[i].t), 2e-3);
      if (i > 0) EXPECT_GE(cps[i].nfe, cps[i - 1].nfe);
    }
    EXPECT_EQ(cps.back().x, r.x);
    EXPECT_EQ(cps.back().nfe, r.trajectory.nfe);
  }
  const auto e = integrate(decay(), vec({1.0}), 1.0, 0.0, SolverConfig::euler(100), opts);
  EXPECT_GE(e.trajectory.nfe, 100u);
}

TEST(Integrate, RecordStepsGivesMonotoneTimes) {
  IntegrateOptions opts;
  opts.record_steps = true;
  const auto r = integrate(decay(), vec({1.0}), 0.0, 2.0, SolverConfig::rk45(1e-7, 1e-7), opts);
  const auto& cps = r.trajectory.checkpoints;
  EXPECT_EQ(cps.size(), r.trajectory.accepted + 1);
  for (std::size_t i = 1; i < cps.size(); ++i) EXPECT_GT(cps[i].t, cps[i - 1].t);
}

TEST(Integrate, MaxStepsCarriesPartialTrajectory) {
  SolverConfig cfg = SolverConfig::rk45(1e-12, 1e-12);
  std::get<Rk45>(cfg.method).max_steps = 5;
  try {
    integrate(decay(), vec({1.0}), 0.0, 1.0, cfg);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_EQ(e.partial().accepted + e.partial().rejected, 5u);
    EXPECT_FALSE(e.partial().checkpoints.empty());
  }
}

TEST(Integrate, NonFiniteStateReportsTime) {
  const OdeRhs blow = [](double t, const Vector& x) {
    return Vector(Vector::Constant(x.size(), t > 0.5 ? std::nan("") : 1.0));
  };
  try {
    integrate(blow, vec({0.0}), 0.0, 1.0, SolverConfig::euler(10));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_GT(e.time(), 0.5);
  }
  EXPECT_THROW(integrate(blow, vec({0.0}), 0.0, 1.0, SolverConfig::rk45(1e-6, 1e-6)), Error);
  EXPECT_THROW(integrate(decay(), vec({std::nan("")}), 0.0, 1.0, SolverConfig::euler(3)), NumericalError);
}

TEST(Integrate, BadArguments) {
  EXPECT_THROW(integrate(decay(), vec({1.0}), 0.5, 0.5, SolverConfig::euler(3)), ContractError);
  IntegrateOptions opts;
  opts.checkpoint_times = {1.5};
  EXPECT_THROW(integrate(decay(), vec({1.0}), 0.0, 1.0, SolverConfig::euler(3), opts), ContractError);
  EXPECT_THROW(integrate(decay(), vec({1.0}), 0.0, 1.0, SolverConfig::euler(0)), ConfigError);
  EXPECT_THROW(integrate(decay(), vec({1.0}), 0.0, 1.0, SolverConfig::rk45(0.0, 1e-6)), ConfigError);
}

TEST(SolverConfig, Validation) {
  EXPECT_NO_THROW(SolverConfig::rk45(1e-5, 1e-5).validate(1.0));
  EXPECT_THROW(SolverConfig::euler(0).validate(1.0), ConfigError);
  EXPECT_THROW(SolverConfig::rk45(-1.0, 1e-5).validate(1.0), ConfigError);
  EXPECT_THROW(SolverConfig::rk45(1e-5, 1e-5, 0.0).validate(1.0), ConfigError);
  EXPECT_THROW(SolverConfig::rk45(1e-5, 1e-5, 1.0).validate(1.0), ConfigError);
  SolverConfig c = SolverConfig::rk45(1e-5, 1e-5);
  std::get<Rk45>(c.method).max_steps = 0;
  EXPECT_THROW(c.validate(1.0), ConfigError);
}

TEST(Trajectory, JsonLines) {
  Trajectory tr;
  tr.checkpoints.push_back({1.0, vec({0.5, -2.0}), 0});
  tr.checkpoints.push_back({0.25, vec({0.1, 3.0}), 7});
  std::ostringstream out;
  write_trajectory_jsonl(out, tr);
  EXPECT_EQ(out.str(),
            "{\"t\":1,\"x\":[0.5,-2],\"nfe\":0}\n"
            "{\"t\":0.25,\"x\":[0.10000000000000001,3],\"nfe\":7}\n");
}
