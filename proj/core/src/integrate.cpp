#include "flowlik/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "numfmt.hpp"

namespace flowlik {

Matrix VectorField::vjp_many(double t, const Vector& x, const Matrix& vs) const {
  Matrix out(dim(), vs.cols());
  for (Index i = 0; i < vs.cols(); ++i) out.col(i) = vjp(t, x, vs.col(i));
  return out;
}

void SolverConfig::validate(double terminal_time) const {
  if (const auto* e = std::get_if<EulerFixed>(&method)) {
    if (e->steps < 1) throw ConfigError("solver: euler steps must be >= 1");
  } else {
    const auto& r = std::get<Rk45>(method);
    if (!(r.rtol > 0.0) || !(r.atol > 0.0)) throw ConfigError("solver: rtol and atol must be > 0");
    if (r.max_steps < 1) throw ConfigError("solver: max_steps must be >= 1");
    if (!(r.min_factor > 0.0 && r.min_factor <= 1.0 && r.max_factor >= 1.0)) {
      throw ConfigError("solver: step factors must satisfy 0 < min_factor <= 1 <= max_factor");
    }
  }
  if (!(t_min > 0.0 && t_min < terminal_time)) throw ConfigError("solver: t_min must lie in (0, T)");
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b* (fifth minus fourth order weights).
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

std::vector<double> ordered_checkpoints(std::vector<double> ts, double t0, double t1) {
  const double dir = t1 > t0 ? 1.0 : -1.0;
  for (double t : ts) {
    if (!(dir * (t - t0) > 0.0 && dir * (t1 - t) > 0.0)) {
      throw ContractError("integrate: checkpoint time " + std::to_string(t) + " not strictly between t0 and t1");
    }
  }
  std::sort(ts.begin(), ts.end(), [dir](double a, double b) { return dir * a < dir * b; });
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  ts.push_back(t1);
  return ts;
}

void check_finite(const Vector& x, double t) {
  if (!x.allFinite()) throw NumericalError("non-finite state at t = " + std::to_string(t), t);
}

IntegrationResult run_euler(const OdeRhs& rhs, Vector x, double t0, double t1, const EulerFixed& cfg,
                            const std::vector<double>& stops, bool record_steps) {
  IntegrationResult res;
  Trajectory& tr = res.trajectory;
  tr.checkpoints.push_back({t0, x, 0});
  const double total = std::abs(t1 - t0);
  double t = t0;
  for (double stop : stops) {
    const double span = stop - t;
    const auto n = static_cast<std::size_t>(
        std::max(1.0, std::ceil(static_cast<double>(cfg.steps) * std::abs(span) / total - 1e-9)));
    const double h = span / static_cast<double>(n);
    const double seg_start = t;
    for (std::size_t i = 0; i < n; ++i) {
      x += h * rhs(t, x);
      ++tr.nfe;
      ++tr.accepted;
      t = (i + 1 == n) ? stop : seg_start + static_cast<double>(i + 1) * h;
      check_finite(x, t);
      if (record_steps && i + 1 < n) tr.checkpoints.push_back({t, x, tr.nfe});
    }
    tr.checkpoints.push_back({t, x, tr.nfe});
  }
  res.x = std::move(x);
  return res;
}

IntegrationResult run_rk45(const OdeRhs& rhs, Vector y, double t0, double t1, const Rk45& cfg,
                           const std::vector<double>& stops, bool record_steps) {
  IntegrationResult res;
  Trajectory& tr = res.trajectory;
  tr.checkpoints.push_back({t0, y, 0});

  const double dir = t1 > t0 ? 1.0 : -1.0;
  double t = t0;
  double h = 1e-3 * std::abs(t1 - t0) * dir;
  double err_prev = 1e-4;
  bool last_rejected = false;
  std::size_t next_stop = 0;

  Vector k1 = rhs(t, y);
  tr.nfe = 1;
  check_finite(k1, t);
  Vector k2, k3, k4, k5, k6, k7, y_new, err_vec;

  while (true) {
    if (tr.accepted + tr.rejected >= cfg.max_steps) {
      throw IntegrationError("rk45: exceeded max_steps = " + std::to_string(cfg.max_steps) + " at t = " +
                                 std::to_string(t),
                             tr);
    }
    const double target = stops[next_stop];
    bool hit = false;
    if (dir * (t + h - target) >= 0.0) {
      h = target - t;
      hit = true;
    }

    k2 = rhs(t + c2 * h, y + h * (a21 * k1));
    k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    k6 = rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double t_new = hit ? target : t + h;
    k7 = rhs(t_new, y_new);
    tr.nfe += 6;

    err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const Vector scale = (cfg.atol + cfg.rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array()).matrix();
    double err = std::sqrt((err_vec.array() / scale.array()).square().mean());
    if (!std::isfinite(err) || !y_new.allFinite() || !k7.allFinite()) err = INFINITY;

    if (err <= 1.0) {
      t = t_new;
      y = y_new;
      k1 = k7;
      ++tr.accepted;
      if (hit) {
        tr.checkpoints.push_back({t, y, tr.nfe});
        if (++next_stop == stops.size()) break;
      } else if (record_steps) {
        tr.checkpoints.push_back({t, y, tr.nfe});
      }
      double factor = err == 0.0 ? cfg.max_factor
                                 : cfg.safety * std::pow(err, -cfg.alpha) * std::pow(err_prev, cfg.beta);
      factor = std::clamp(factor, cfg.min_factor, cfg.max_factor);
      if (last_rejected) factor = std::min(factor, 1.0);
      err_prev = std::max(err, 1e-4);
      last_rejected = false;
      h *= factor;
    } else {
      ++tr.rejected;
      last_rejected = true;
      const double factor =
          std::isfinite(err) ? std::max(cfg.min_factor, cfg.safety * std::pow(err, -cfg.alpha)) : cfg.min_factor;
      h *= factor;
      if (std::abs(h) <= 1e-14 * std::max(1.0, std::abs(t))) {
        if (!y_new.allFinite() || !k7.allFinite()) throw NumericalError("non-finite state near t = " + std::to_string(t), t);
        throw IntegrationError("rk45: step size underflow at t = " + std::to_string(t), tr);
      }
    }
  }
  res.x = std::move(y);
  return res;
}

}  // namespace

IntegrationResult integrate(const OdeRhs& rhs, const Vector& x, double t0, double t1, const SolverConfig& cfg,
                            const IntegrateOptions& opts) {
  if (t0 == t1) throw ContractError("integrate: t0 and t1 must differ");
  if (!std::isfinite(t0) || !std::isfinite(t1)) throw ContractError("integrate: times must be finite");
  check_finite(x, t0);
  const std::vector<double> stops = ordered_checkpoints(opts.checkpoint_times, t0, t1);
  if (const auto* e = std::get_if<EulerFixed>(&cfg.method)) {
    if (e->steps < 1) throw ConfigError("solver: euler steps must be >= 1");
    return run_euler(rhs, x, t0, t1, *e, stops, opts.record_steps);
  }
  const auto& r = std::get<Rk45>(cfg.method);
  if (!(r.rtol > 0.0) || !(r.atol > 0.0)) throw ConfigError("solver: rtol and atol must be > 0");
  return run_rk45(rhs, x, t0, t1, r, stops, opts.record_steps);
}

IntegrationResult integrate(const VectorField& field, const Vector& x, double t0, double t1, const SolverConfig& cfg,
                            const IntegrateOptions& opts) {
  if (x.size() != field.dim()) throw ContractError("integrate: state dimension does not match the field");
  return integrate([&field](double t, const Vector& y) { return field.eval(t, y); }, x, t0, t1, cfg, opts);
}

void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory) {
  for (const Checkpoint& c : trajectory.checkpoints) {
    out << "{\"t\":" << detail::num17(c.t) << ",\"x\":[";
    for (Index i = 0; i < c.x.size(); ++i) out << (i ? "," : "") << detail::num17(c.x[i]);
    out << "],\"nfe\":" << c.nfe << "}\n";
  }
}

}  // namespace flowlik
