#include "flowlik/schedule.hpp"

#include <cmath>
#include <string>

#include "flowlik/errors.hpp"

namespace flowlik {

namespace {

void check_time(const NoiseSchedule& s, double t) {
  if (!(t >= 0.0 && t <= s.terminal_time)) {
    throw DomainError("time " + std::to_string(t) + " outside [0, " + std::to_string(s.terminal_time) + "]");
  }
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void NoiseSchedule::validate() const {
  if (!positive_finite(beta0)) throw ConfigError("schedule beta0 must be finite and > 0");
  if (!positive_finite(beta_T)) throw ConfigError("schedule beta_T must be finite and > 0");
  if (!positive_finite(terminal_time)) throw ConfigError("schedule terminal_time must be finite and > 0");
}

double beta(const NoiseSchedule& s, double t) {
  check_time(s, t);
  if (t == 0.0) return s.beta0;
  if (t == s.terminal_time) return s.beta_T;
  const double u = t / s.terminal_time;
  switch (s.kind) {
    case ScheduleKind::Linear:
      return s.beta0 + (s.beta_T - s.beta0) * u;
    case ScheduleKind::SubLinear: {
      const double a = std::sqrt(s.beta0);
      const double r = a + (std::sqrt(s.beta_T) - a) * u;
      return r * r;
    }
  }
  return 0.0;
}

double int_beta(const NoiseSchedule& s, double t) {
  check_time(s, t);
  const double T = s.terminal_time;
  switch (s.kind) {
    case ScheduleKind::Linear:
      return s.beta0 * t + (s.beta_T - s.beta0) * t * t / (2.0 * T);
    case ScheduleKind::SubLinear: {
      // (a + c u)^2 with u = t / T integrates to a^2 t + a c t^2 / T + c^2 t^3 / (3 T^2).
      const double a = std::sqrt(s.beta0);
      const double c = std::sqrt(s.beta_T) - a;
      return a * a * t + a * c * t * t / T + c * c * t * t * t / (3.0 * T * T);
    }
  }
  return 0.0;
}

double alpha_bar(const NoiseSchedule& s, double t) { return std::exp(-int_beta(s, t)); }

double ddim_sigma(const NoiseSchedule& s, double t) { return std::sqrt(std::expm1(int_beta(s, t))); }

std::string_view to_string(ScheduleKind kind) {
  return kind == ScheduleKind::Linear ? "linear" : "sublinear";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "sublinear") return ScheduleKind::SubLinear;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "' (expected linear|sublinear)");
}

}  // namespace flowlik
