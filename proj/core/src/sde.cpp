#include "flowlik/sde.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "flowlik/errors.hpp"

namespace flowlik {

void SdeSpec::validate() const {
  schedule.validate();
  if (variant == SdeVariant::MRVP) {
    if (!condition_mean) throw ConfigError("MRVP sde requires a condition mean");
    if (!condition_mean->allFinite()) throw ConfigError("MRVP condition mean must be finite");
  } else if (condition_mean) {
    throw ConfigError(std::string(to_string(variant)) + " sde does not take a condition mean");
  }
}

SdeSpec SdeSpec::vp(NoiseSchedule schedule) { return SdeSpec{SdeVariant::VP, schedule, std::nullopt}; }

SdeSpec SdeSpec::mrvp(Vector mu, NoiseSchedule schedule) {
  return SdeSpec{SdeVariant::MRVP, schedule, std::move(mu)};
}

SdeSpec SdeSpec::ddim_sigma(NoiseSchedule schedule) {
  return SdeSpec{SdeVariant::DdimSigma, schedule, std::nullopt};
}

namespace {

const Vector& mean_of(const SdeSpec& sde, Index dim) {
  if (!sde.condition_mean) throw ConfigError("MRVP sde requires a condition mean");
  if (sde.condition_mean->size() != dim) {
    throw ContractError("MRVP condition mean has dimension " + std::to_string(sde.condition_mean->size()) +
                        ", state has " + std::to_string(dim));
  }
  return *sde.condition_mean;
}

}  // namespace

MarginalKernel marginal(const SdeSpec& sde, Index dim, double t) {
  const double B = int_beta(sde.schedule, t);
  MarginalKernel k;
  switch (sde.variant) {
    case SdeVariant::VP:
      k.mean_coeff = std::exp(-0.5 * B);
      k.mean_offset = Vector::Zero(dim);
      k.std = std::sqrt(-std::expm1(-B));
      break;
    case SdeVariant::MRVP: {
      const Vector& mu = mean_of(sde, dim);
      k.mean_coeff = std::exp(-0.5 * B);
      k.mean_offset = (1.0 - k.mean_coeff) * mu;
      k.std = std::sqrt(-std::expm1(-B));
      break;
    }
    case SdeVariant::DdimSigma:
      k.mean_coeff = 1.0;
      k.mean_offset = Vector::Zero(dim);
      k.std = std::sqrt(std::expm1(B));
      break;
  }
  return k;
}

MarginalKernel marginal(const SdeSpec& sde, const Vector& x0, double t) {
  if (!x0.allFinite()) throw ContractError("marginal: x0 must be finite");
  sde.validate();
  return marginal(sde, x0.size(), t);
}

Vector drift(const SdeSpec& sde, const Vector& x, double t) {
  const double b = beta(sde.schedule, t);
  switch (sde.variant) {
    case SdeVariant::VP:
      return -0.5 * b * x;
    case SdeVariant::MRVP:
      return 0.5 * b * (mean_of(sde, x.size()) - x);
    case SdeVariant::DdimSigma:
      return Vector::Zero(x.size());
  }
  return {};
}

double drift_slope(const SdeSpec& sde, double t) {
  return sde.variant == SdeVariant::DdimSigma ? 0.0 : -0.5 * beta(sde.schedule, t);
}

double diffusion(const SdeSpec& sde, double t) {
  const double b = beta(sde.schedule, t);
  if (sde.variant == SdeVariant::DdimSigma) return std::sqrt(b * std::exp(int_beta(sde.schedule, t)));
  return std::sqrt(b);
}

Prior prior_for(const SdeSpec& sde, Index dim) {
  switch (sde.variant) {
    case SdeVariant::VP:
      return Prior{Vector::Zero(dim), 1.0};
    case SdeVariant::MRVP:
      return Prior{mean_of(sde, dim), 1.0};
    case SdeVariant::DdimSigma: {
      const double s = ddim_sigma(sde.schedule, sde.terminal_time());
      return Prior{Vector::Zero(dim), s * s + 1.0};
    }
  }
  return {};
}

double prior_logp(const Prior& prior, const Vector& x) {
  if (prior.mean.size() != x.size()) throw ContractError("prior_logp: dimension mismatch");
  const double d = static_cast<double>(x.size());
  return -0.5 * d * std::log(2.0 * std::numbers::pi * prior.variance) -
         0.5 * (x - prior.mean).squaredNorm() / prior.variance;
}

std::string_view to_string(SdeVariant v) {
  switch (v) {
    case SdeVariant::VP:
      return "vp";
    case SdeVariant::MRVP:
      return "mrvp";
    case SdeVariant::DdimSigma:
      return "ddim_sigma";
  }
  return "?";
}

SdeVariant parse_sde_variant(std::string_view name) {
  if (name == "vp") return SdeVariant::VP;
  if (name == "mrvp") return SdeVariant::MRVP;
  if (name == "ddim_sigma") return SdeVariant::DdimSigma;
  throw ConfigError("unknown sde '" + std::string(name) + "' (expected vp|mrvp|ddim_sigma)");
}

}  // namespace flowlik
