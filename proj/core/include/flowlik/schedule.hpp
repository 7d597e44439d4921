#pragma once

#include <string_view>

namespace flowlik {

enum class ScheduleKind { Linear, SubLinear };

/// beta(t) on [0, T]. With s = t / T:
///   Linear:    beta0 + (betaT - beta0) s
///   SubLinear: (sqrt(beta0) + (sqrt(betaT) - sqrt(beta0)) s)^2
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::Linear;
  double beta0 = 0.05;
  double beta_T = 20.0;
  double terminal_time = 1.0;

  /// Throws ConfigError unless beta0, beta_T and terminal_time are finite and positive.
  void validate() const;
};

/// Throws DomainError for t outside [0, T].
double beta(const NoiseSchedule& schedule, double t);

/// Closed-form B(t) = integral of beta over [0, t].
double int_beta(const NoiseSchedule& schedule, double t);

/// Continuous-time cumulative signal level exp(-B(t)).
double alpha_bar(const NoiseSchedule& schedule, double t);

/// sigma(t) = sqrt((1 - abar) / abar) = sqrt(exp(B(t)) - 1).
double ddim_sigma(const NoiseSchedule& schedule, double t);

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

}  // namespace flowlik
