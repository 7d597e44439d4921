#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "flowlik/errors.hpp"
#include "flowlik/types.hpp"

namespace flowlik {

/// A time-dependent vector field with reverse-mode access to its input Jacobian.
class VectorField {
 public:
  virtual ~VectorField() = default;
  virtual Index dim() const = 0;
  virtual Vector eval(double t, const Vector& x) const = 0;
  /// v^T d(eval)/dx.
  virtual Vector vjp(double t, const Vector& x, const Vector& v) const = 0;
  /// Column i is vjp(t, x, vs.col(i)).
  virtual Matrix vjp_many(double t, const Vector& x, const Matrix& vs) const;
};

using OdeRhs = std::function<Vector(double t, const Vector& x)>;

struct EulerFixed {
  std::size_t steps = 100;
};

/// Dormand-Prince 5(4), FSAL, PI step-size control:
///   h_new = h * clamp(safety * err^-alpha * err_prev^beta, min_factor, max_factor)
/// with alpha = 0.7 / 5 and beta = 0.4 / 5. After a rejection the factor is capped at 1.
struct Rk45 {
  double rtol = 1e-6;
  double atol = 1e-6;
  std::size_t max_steps = 100000;
  double safety = 0.9;
  double alpha = 0.7 / 5.0;
  double beta = 0.4 / 5.0;
  double min_factor = 0.2;
  double max_factor = 5.0;
};

struct SolverConfig {
  std::variant<EulerFixed, Rk45> method = Rk45{};
  double t_min = 1e-5;

  /// steps >= 1, tolerances > 0, t_min in (0, terminal_time).
  void validate(double terminal_time) const;
  static SolverConfig euler(std::size_t steps, double t_min = 1e-5) { return {EulerFixed{steps}, t_min}; }
  static SolverConfig rk45(double rtol, double atol, double t_min = 1e-5) {
    Rk45 r;
    r.rtol = rtol;
    r.atol = atol;
    return {r, t_min};
  }
};

struct Checkpoint {
  double t = 0.0;
  Vector x;
  std::size_t nfe = 0;  // cumulative
};

/// nfe accounting: EulerFixed costs one evaluation per step. Rk45 costs one
/// evaluation for the first stage plus six per attempted step (FSAL reuses
/// the last stage of an accepted step as the first stage of the next, and a
/// rejected step keeps its first stage), so nfe = 1 + 6 (accepted + rejected).
struct Trajectory {
  std::vector<Checkpoint> checkpoints;
  std::size_t nfe = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

struct IntegrateOptions {
  /// Times strictly between t0 and t1 at which the state is recorded; the
  /// solver lands on them exactly. t0 and t1 are always recorded.
  std::vector<double> checkpoint_times;
  bool record_steps = false;
};

struct IntegrationResult {
  Vector x;
  Trajectory trajectory;
};

/// Rk45 ran out of steps; carries everything integrated so far.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, Trajectory partial) : Error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

/// Solves dx/dt = rhs(t, x) from t0 to t1 (either direction). ContractError if
/// t0 == t1 or a checkpoint lies outside (t0, t1); NumericalError on a
/// non-finite state; IntegrationError when Rk45 exceeds max_steps.
IntegrationResult integrate(const OdeRhs& rhs, const Vector& x, double t0, double t1, const SolverConfig& cfg,
                            const IntegrateOptions& opts = {});
IntegrationResult integrate(const VectorField& field, const Vector& x, double t0, double t1,
                            const SolverConfig& cfg, const IntegrateOptions& opts = {});

/// One JSON object per checkpoint: {"t":..,"x":[..],"nfe":..}.
void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory);

}  // namespace flowlik
