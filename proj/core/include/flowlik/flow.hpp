#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "flowlik/condition.hpp"
#include "flowlik/integrate.hpp"
#include "flowlik/random.hpp"
#include "flowlik/score.hpp"
#include "flowlik/sde.hpp"

namespace flowlik {

enum class FieldModeKind { Conditional, Guided, Unconditional };

struct FieldMode {
  FieldModeKind kind = FieldModeKind::Conditional;
  double omega = 0.0;  // Guided only

  std::string describe() const;
};

/// Probability-flow ODE right-hand side
///   VP / MRVP:  f(x, t) - 1/2 g(t)^2 s(x, t, c)
///   DdimSigma:  -1/2 beta(t) exp(B(t)/2) s_vp(x exp(-B(t)/2), t, c)
/// which is the sigma-parameterised ODE dX = eps(X / sqrt(sigma^2+1)) dsigma
/// converted to t-time with eps = -sqrt(1 - abar) s_vp. When guidance is set
/// s is the guided score.
class FlowField final : public VectorField {
 public:
  FlowField(SdeSpec sde, std::shared_ptr<const ScoreField> score, Condition condition,
            std::optional<GuidanceConfig> guidance = std::nullopt);

  Index dim() const override { return score_->dim(); }
  Vector eval(double t, const Vector& x) const override;
  Vector vjp(double t, const Vector& x, const Vector& v) const override;
  Matrix vjp_many(double t, const Vector& x, const Matrix& vs) const override;

  /// Score of the state's own marginal (VE coordinates for DdimSigma).
  Vector state_score(double t, const Vector& x) const;
  /// Reverse-time SDE drift f - g^2 s.
  Vector reverse_drift(double t, const Vector& x) const;
  double diffusion(double t) const { return flowlik::diffusion(sde_, t); }

  /// Sde with mu bound from the condition (MRVP).
  const SdeSpec& sde() const { return sde_; }
  const ScoreField& score() const { return *score_; }
  const Condition& condition() const { return condition_; }
  const std::optional<GuidanceConfig>& guidance() const { return guidance_; }
  FieldMode mode() const;
  Prior prior() const { return prior_for(sde_, dim()); }
  double terminal_time() const { return sde_.terminal_time(); }

 private:
  void check_time(double t) const;
  Vector raw_score(double t, const Vector& y) const;
  Matrix raw_score_vjp_many(double t, const Vector& y, const Matrix& vs) const;

  SdeSpec sde_;
  std::shared_ptr<const ScoreField> score_;
  Condition condition_;
  std::optional<GuidanceConfig> guidance_;
};

/// Euler-Maruyama for dX = drift dt + g dW from t0 to t1 in `steps` uniform
/// steps; dW = sqrt(|dt|) N(0, I).
using DriftFn = std::function<Vector(double t, const Vector& x)>;
using DiffusionFn = std::function<double(double t)>;
Vector euler_maruyama(const DriftFn& drift, const DiffusionFn& g, Vector x, double t0, double t1, std::size_t steps,
                      Rng& rng);

/// Reverse SDE from T down to cfg.t_min. Requires an EulerFixed config.
Vector sample_reverse_sde(const FlowField& field, const Vector& x_T, const SolverConfig& cfg, std::uint64_t seed);

/// Probability-flow ODE from T down to t_min.
IntegrationResult sample_ode(const FlowField& field, const Vector& x_T, const SolverConfig& cfg,
                             const IntegrateOptions& opts = {});

struct Reconstruction {
  Vector x_T;
  Vector x0;
  std::size_t nfe_forward = 0;
  std::size_t nfe_reverse = 0;
};

/// Forward ODE t_min -> T, then reverse ODE T -> t_min.
Reconstruction reconstruct(const VectorField& field, const Vector& x0, double terminal_time,
                           const SolverConfig& forward, const SolverConfig& reverse);
Reconstruction reconstruct(const FlowField& field, const Vector& x0, const SolverConfig& forward,
                           const SolverConfig& reverse);
inline Reconstruction reconstruct(const FlowField& field, const Vector& x0, const SolverConfig& cfg) {
  return reconstruct(field, x0, cfg, cfg);
}

}  // namespace flowlik
