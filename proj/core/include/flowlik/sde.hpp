#pragma once

#include <optional>
#include <string_view>

#include "flowlik/schedule.hpp"
#include "flowlik/types.hpp"

namespace flowlik {

/// VP:        dX = -1/2 beta X dt + sqrt(beta) dW
/// MRVP:      dX = 1/2 (mu - X) beta dt + sqrt(beta) dW
/// DdimSigma: variance-exploding form in sigma-time, X_ve = X_vp * sqrt(sigma^2 + 1);
///            f = 0 and g^2 = d(sigma^2)/dt = beta exp(B).
enum class SdeVariant { VP, MRVP, DdimSigma };

struct SdeSpec {
  SdeVariant variant = SdeVariant::VP;
  NoiseSchedule schedule{};
  std::optional<Vector> condition_mean;

  /// MRVP requires condition_mean; VP and DdimSigma forbid it.
  void validate() const;
  double terminal_time() const { return schedule.terminal_time; }

  static SdeSpec vp(NoiseSchedule schedule = {});
  static SdeSpec mrvp(Vector mu, NoiseSchedule schedule = {});
  static SdeSpec ddim_sigma(NoiseSchedule schedule = {});
};

/// Law of X_t given X_0 = x0: N(mean_coeff * x0 + mean_offset, std^2 I).
struct MarginalKernel {
  double mean_coeff = 1.0;
  Vector mean_offset;
  double std = 0.0;

  Vector mean(const Vector& x0) const { return mean_coeff * x0 + mean_offset; }
};

MarginalKernel marginal(const SdeSpec& sde, Index dim, double t);
MarginalKernel marginal(const SdeSpec& sde, const Vector& x0, double t);

/// Forward drift f(x, t).
Vector drift(const SdeSpec& sde, const Vector& x, double t);
/// The drift is isotropic and linear: df/dx = drift_slope(t) * I.
double drift_slope(const SdeSpec& sde, double t);
/// Diffusion coefficient g(t).
double diffusion(const SdeSpec& sde, double t);

/// N(mean, variance * I). variance is 1 except for DdimSigma, whose state at T
/// is scaled by sqrt(sigma(T)^2 + 1).
struct Prior {
  Vector mean;
  double variance = 1.0;
};

Prior prior_for(const SdeSpec& sde, Index dim);

/// log N(x; mean, variance I) in nats.
double prior_logp(const Prior& prior, const Vector& x);

std::string_view to_string(SdeVariant variant);
SdeVariant parse_sde_variant(std::string_view name);

}  // namespace flowlik
