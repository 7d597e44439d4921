#include "flowlik/eval/sweep.hpp"

#include <cmath>
#include <limits>

#include "flowlik/errors.hpp"
#include "flowlik/parallel.hpp"
#include "flowlik/random.hpp"

namespace flowlik::eval {

std::vector<double> sweep_times(std::size_t num_times, double terminal_time, double t_min) {
  if (num_times < 2) throw ConfigError("sweep: num_times must be at least 2");
  if (!(t_min > 0.0 && t_min < terminal_time)) throw ConfigError("sweep: need 0 < t_min < T");
  std::vector<double> times(num_times);
  for (std::size_t k = 0; k < num_times; ++k) {
    const double t = terminal_time * (1.0 - static_cast<double>(k) / static_cast<double>(num_times - 1));
    times[k] = std::max(t, t_min);
  }
  times.front() = terminal_time;
  times.back() = t_min;
  return times;
}

SweepResult sweep_time(const FlowField& field, const SweepConfig& cfg) {
  if (cfg.num_samples == 0) throw ConfigError("sweep: num_samples must be positive");
  const double T = field.terminal_time();
  const double t_min = cfg.likelihood.solver.t_min;
  SweepResult result;
  result.times = sweep_times(cfg.num_times, T, t_min);
  const std::size_t nt = result.times.size();
  result.bpd = Matrix::Constant(static_cast<Index>(cfg.num_samples), static_cast<Index>(nt),
                                std::numeric_limits<double>::quiet_NaN());

  IntegrateOptions opts;
  opts.checkpoint_times.assign(result.times.begin() + 1, result.times.end() - 1);
  const Prior prior = field.prior();
  const Index dim = field.dim();

  parallel_for(cfg.num_samples, cfg.workers, [&](std::size_t i) {
    Rng rng = Rng::stream(cfg.seed, i);
    const Vector xT = prior.mean + std::sqrt(prior.variance) * rng.normal_vector(dim);
    std::vector<Checkpoint> states;
    try {
      states = integrate(field, xT, T, t_min, cfg.sampler, opts).trajectory.checkpoints;
    } catch (const Error&) {
      return;
    }
    if (states.size() != nt) return;
    for (std::size_t k = 0; k < nt; ++k) {
      try {
        result.bpd(static_cast<Index>(i), static_cast<Index>(k)) =
            log_likelihood_at_time(field, states[k].x, result.times[k], cfg.likelihood, i).bpd();
      } catch (const Error&) {
      }
    }
  });

  for (std::size_t k = 0; k < nt; ++k) {
    SweepRow row;
    row.t = result.times[k];
    double sum = 0.0;
    double sq = 0.0;
    for (Index i = 0; i < result.bpd.rows(); ++i) {
      const double v = result.bpd(i, static_cast<Index>(k));
      if (!std::isfinite(v)) continue;
      sum += v;
      ++row.count;
    }
    if (row.count > 0) {
      row.mean_bpd = sum / static_cast<double>(row.count);
      for (Index i = 0; i < result.bpd.rows(); ++i) {
        const double v = result.bpd(i, static_cast<Index>(k));
        if (std::isfinite(v)) sq += (v - row.mean_bpd) * (v - row.mean_bpd);
      }
      if (row.count > 1) {
        const double n = static_cast<double>(row.count);
        row.se_bpd = std::sqrt(sq / (n - 1.0) / n);
      }
    } else {
      row.mean_bpd = std::numeric_limits<double>::quiet_NaN();
    }
    result.rows.push_back(row);
  }
  return result;
}

bool bpd_non_increasing(const SweepResult& result, double num_se) {
  for (std::size_t k = 0; k + 1 < result.rows.size(); ++k) {
    const SweepRow& a = result.rows[k];
    const SweepRow& b = result.rows[k + 1];
    if (a.count == 0 || b.count == 0) return false;
    const double slack = num_se * std::sqrt(a.se_bpd * a.se_bpd + b.se_bpd * b.se_bpd);
    if (b.mean_bpd > a.mean_bpd + slack) return false;
  }
  return true;
}

}  // namespace flowlik::eval
