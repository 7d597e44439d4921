#include "flowlik/flow.hpp"

#include <cmath>
#include <sstream>

#include "flowlik/errors.hpp"

namespace flowlik {

std::string FieldMode::describe() const {
  switch (kind) {
    case FieldModeKind::Conditional:
      return "conditional";
    case FieldModeKind::Unconditional:
      return "unconditional";
    case FieldModeKind::Guided: {
      std::ostringstream os;
      os << "guided(" << omega << ")";
      return os.str();
    }
  }
  return "?";
}

namespace {

bool same_schedule(const NoiseSchedule& a, const NoiseSchedule& b) {
  return a.kind == b.kind && a.beta0 == b.beta0 && a.beta_T == b.beta_T && a.terminal_time == b.terminal_time;
}

}  // namespace

FlowField::FlowField(SdeSpec sde, std::shared_ptr<const ScoreField> score, Condition condition,
                     std::optional<GuidanceConfig> guidance)
    : condition_(std::move(condition)), guidance_(guidance) {
  if (!score) throw ConfigError("flow field needs a score field");
  if (guidance_ && condition_.is_null()) throw ContractError("guidance of the null condition is undefined");
  if (guidance_ && !(std::isfinite(guidance_->omega) && guidance_->omega >= 0.0)) {
    throw ConfigError("guidance scale must be finite and >= 0");
  }
  const SdeVariant expected = sde.variant == SdeVariant::DdimSigma ? SdeVariant::VP : sde.variant;
  if (score->sde().variant != expected) {
    throw ConfigError("score field trained under " + std::string(to_string(score->sde().variant)) +
                      " cannot drive a " + std::string(to_string(sde.variant)) + " flow");
  }
  if (!same_schedule(score->sde().schedule, sde.schedule)) {
    throw ConfigError("score field and flow use different noise schedules");
  }
  sde_ = bind_condition(sde, condition_);
  if (sde_.condition_mean && sde_.condition_mean->size() != score->dim()) {
    throw ContractError("MRVP condition mean dimension does not match the score field");
  }
  // The score is re-bound to this flow's sde so MRVP kernels see the same mu.
  SdeSpec score_sde = sde_.variant == SdeVariant::DdimSigma ? SdeSpec::vp(sde_.schedule) : sde_;
  score_ = std::make_shared<const ScoreField>(score->impl(), std::move(score_sde));
}

FieldMode FlowField::mode() const {
  if (guidance_) return {FieldModeKind::Guided, guidance_->omega};
  if (condition_.is_null()) return {FieldModeKind::Unconditional, 0.0};
  return {FieldModeKind::Conditional, 0.0};
}

void FlowField::check_time(double t) const {
  if (!(t >= 0.0 && t <= sde_.terminal_time())) {
    throw DomainError("flow evaluated at t = " + std::to_string(t) + " outside [0, T]");
  }
}

Vector FlowField::raw_score(double t, const Vector& y) const {
  return guidance_ ? cfg_score(*score_, y, t, condition_, *guidance_) : score_eval(*score_, y, t, condition_);
}

Matrix FlowField::raw_score_vjp_many(double t, const Vector& y, const Matrix& vs) const {
  return guidance_ ? cfg_vjp_many(*score_, y, t, condition_, *guidance_, vs)
                   : score_vjp_many(*score_, y, t, condition_, vs);
}

Vector FlowField::eval(double t, const Vector& x) const {
  check_time(t);
  const double b = beta(sde_.schedule, t);
  if (sde_.variant == SdeVariant::DdimSigma) {
    const double half_B = 0.5 * int_beta(sde_.schedule, t);
    return (-0.5 * b * std::exp(half_B)) * raw_score(t, x * std::exp(-half_B));
  }
  return drift(sde_, x, t) - (0.5 * b) * raw_score(t, x);
}

Matrix FlowField::vjp_many(double t, const Vector& x, const Matrix& vs) const {
  check_time(t);
  const double b = beta(sde_.schedule, t);
  if (sde_.variant == SdeVariant::DdimSigma) {
    const double half_B = 0.5 * int_beta(sde_.schedule, t);
    // The exp(+B/2) prefactor cancels the exp(-B/2) input scaling.
    return (-0.5 * b) * raw_score_vjp_many(t, x * std::exp(-half_B), vs);
  }
  return drift_slope(sde_, t) * vs - (0.5 * b) * raw_score_vjp_many(t, x, vs);
}

Vector FlowField::vjp(double t, const Vector& x, const Vector& v) const { return vjp_many(t, x, v); }

Vector FlowField::state_score(double t, const Vector& x) const {
  check_time(t);
  if (sde_.variant == SdeVariant::DdimSigma) {
    const double s = std::exp(-0.5 * int_beta(sde_.schedule, t));
    return s * raw_score(t, x * s);
  }
  return raw_score(t, x);
}

Vector FlowField::reverse_drift(double t, const Vector& x) const {
  const double g = diffusion(t);
  return flowlik::drift(sde_, x, t) - (g * g) * state_score(t, x);
}

Vector euler_maruyama(const DriftFn& drift_fn, const DiffusionFn& g, Vector x, double t0, double t1,
                      std::size_t steps, Rng& rng) {
  if (steps < 1) throw ConfigError("euler-maruyama: steps must be >= 1");
  const double h = (t1 - t0) / static_cast<double>(steps);
  const double sqrt_h = std::sqrt(std::abs(h));
  double t = t0;
  for (std::size_t i = 0; i < steps; ++i) {
    const Vector dW = sqrt_h * rng.normal_vector(x.size());
    x += h * drift_fn(t, x) + g(t) * dW;
    t = (i + 1 == steps) ? t1 : t0 + static_cast<double>(i + 1) * h;
    if (!x.allFinite()) throw NumericalError("non-finite state at t = " + std::to_string(t), t);
  }
  return x;
}

Vector sample_reverse_sde(const FlowField& field, const Vector& x_T, const SolverConfig& cfg, std::uint64_t seed) {
  const auto* euler = std::get_if<EulerFixed>(&cfg.method);
  if (!euler) throw ContractError("sample_reverse_sde requires a fixed-step Euler config");
  cfg.validate(field.terminal_time());
  if (x_T.size() != field.dim()) throw ContractError("sample_reverse_sde: dimension mismatch");
  Rng rng(seed);
  return euler_maruyama([&field](double t, const Vector& x) { return field.reverse_drift(t, x); },
                        [&field](double t) { return field.diffusion(t); }, x_T, field.terminal_time(), cfg.t_min,
                        euler->steps, rng);
}

IntegrationResult sample_ode(const FlowField& field, const Vector& x_T, const SolverConfig& cfg,
                             const IntegrateOptions& opts) {
  cfg.validate(field.terminal_time());
  return integrate(field, x_T, field.terminal_time(), cfg.t_min, cfg, opts);
}

Reconstruction reconstruct(const VectorField& field, const Vector& x0, double terminal_time,
                           const SolverConfig& forward, const SolverConfig& reverse) {
  forward.validate(terminal_time);
  reverse.validate(terminal_time);
  Reconstruction r;
  auto fwd = integrate(field, x0, forward.t_min, terminal_time, forward);
  r.x_T = std::move(fwd.x);
  r.nfe_forward = fwd.trajectory.nfe;
  auto rev = integrate(field, r.x_T, terminal_time, reverse.t_min, reverse);
  r.x0 = std::move(rev.x);
  r.nfe_reverse = rev.trajectory.nfe;
  return r;
}

Reconstruction reconstruct(const FlowField& field, const Vector& x0, const SolverConfig& forward,
                           const SolverConfig& reverse) {
  return reconstruct(field, x0, field.terminal_time(), forward, reverse);
}

}  // namespace flowlik
