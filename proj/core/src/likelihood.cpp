#include "flowlik/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "flowlik/errors.hpp"
#include "flowlik/parallel.hpp"
#include "numfmt.hpp"

namespace flowlik {

double divergence_exact(const VectorField& field, const Vector& x, double t) {
  const Index d = field.dim();
  if (d > kExactDivergenceMaxDim) {
    throw ContractError("exact divergence limited to " + std::to_string(kExactDivergenceMaxDim) +
                        " dimensions (got " + std::to_string(d) + "); use the Hutchinson estimator");
  }
  return field.vjp_many(t, x, Matrix::Identity(d, d)).trace();
}

Matrix draw_probes(ProbeDistribution distribution, Index dim, std::size_t count, Rng& rng) {
  if (count < 1) throw ContractError("hutchinson: num_probes must be >= 1");
  Matrix probes(dim, static_cast<Index>(count));
  for (Index j = 0; j < probes.cols(); ++j) {
    probes.col(j) =
        distribution == ProbeDistribution::Rademacher ? rng.rademacher_vector(dim) : rng.normal_vector(dim);
  }
  return probes;
}

Matrix draw_probes(const TraceProbeConfig& cfg, Index dim, std::uint64_t sample_index) {
  Rng rng = Rng::stream(cfg.seed, sample_index);
  return draw_probes(cfg.distribution, dim, cfg.num_probes, rng);
}

Vector hutchinson_terms(const VectorField& field, const Vector& x, double t, const Matrix& probes) {
  if (probes.cols() < 1) throw ContractError("hutchinson: num_probes must be >= 1");
  if (probes.rows() != field.dim()) throw ContractError("hutchinson: probe dimension mismatch");
  const Matrix jt = field.vjp_many(t, x, probes);
  return probes.cwiseProduct(jt).colwise().sum().transpose();
}

double divergence_hutchinson(const VectorField& field, const Vector& x, double t, const Matrix& probes) {
  return hutchinson_terms(field, x, t, probes).mean();
}

double divergence_hutchinson(const VectorField& field, const Vector& x, double t, const TraceProbeConfig& cfg,
                             std::uint64_t sample_index) {
  return divergence_hutchinson(field, x, t, draw_probes(cfg, field.dim(), sample_index));
}

double bpd(double logp, std::span<const std::size_t> shape) {
  if (shape.empty()) throw ContractError("bpd: shape must be nonempty");
  double dims = 1.0;
  for (std::size_t d : shape) {
    if (d < 1) throw ContractError("bpd: every dimension must be >= 1");
    dims *= static_cast<double>(d);
  }
  return -logp * std::numbers::log2e / dims;
}

LikelihoodResult::LikelihoodResult(double prior_logp, double div_integral, double dequant_correction,
                                   std::vector<std::size_t> shape, std::size_t nfe, FieldMode mode, double t_start,
                                   std::size_t num_probes, std::uint64_t seed, Vector x_T)
    : prior_logp_(prior_logp),
      div_integral_(div_integral),
      logp_(prior_logp + div_integral + dequant_correction),
      bpd_(flowlik::bpd(logp_, shape)),
      shape_(std::move(shape)),
      nfe_(nfe),
      mode_(mode),
      t_start_(t_start),
      num_probes_(num_probes),
      seed_(seed),
      x_T_(std::move(x_T)) {}

AugmentedSolution integrate_divergence(const VectorField& field, const Vector& x, double t_start, double t_end,
                                       const DivergenceMethod& method, const SolverConfig& solver,
                                       std::uint64_t sample_index) {
  const Index d = field.dim();
  if (x.size() != d) throw ContractError("likelihood: sample dimension does not match the field");
  if (!x.allFinite()) throw ContractError("likelihood: sample must be finite");
  if (t_start == t_end) return {x, 0.0, 0};

  Matrix probes;
  if (const auto* p = std::get_if<TraceProbeConfig>(&method)) {
    probes = draw_probes(*p, d, sample_index);
  } else if (d > kExactDivergenceMaxDim) {
    divergence_exact(field, x, t_start);  // throws the cost-guard error
  }
  const bool exact = probes.size() == 0;

  auto rhs = [&](double t, const Vector& z) {
    const Vector xs = z.head(d);
    Vector dz(d + 1);
    dz.head(d) = field.eval(t, xs);
    dz[d] = exact ? divergence_exact(field, xs, t) : divergence_hutchinson(field, xs, t, probes);
    return dz;
  };
  Vector z0(d + 1);
  z0.head(d) = x;
  z0[d] = 0.0;
  IntegrationResult r = integrate(rhs, z0, t_start, t_end, solver);
  return {r.x.head(d), r.x[d], r.trajectory.nfe};
}

LikelihoodResult log_likelihood_at_time(const FlowField& field, const Vector& x_t, double t,
                                        const LikelihoodConfig& cfg, std::uint64_t sample_index) {
  const double T = field.terminal_time();
  cfg.solver.validate(T);
  if (!(t >= cfg.solver.t_min && t <= T)) {
    throw DomainError("likelihood time " + std::to_string(t) + " outside [t_min, T]");
  }
  std::vector<std::size_t> shape = cfg.shape.empty() ? std::vector<std::size_t>{static_cast<std::size_t>(field.dim())}
                                                     : cfg.shape;
  std::size_t total = 1;
  for (std::size_t s : shape) total *= s;
  if (total != static_cast<std::size_t>(field.dim())) {
    throw ContractError("likelihood: shape does not multiply out to the field dimension");
  }
  double dequant = 0.0;
  if (cfg.dequantization_bins) {
    if (!(*cfg.dequantization_bins >= 1.0)) throw ConfigError("dequantization bins must be >= 1");
    dequant = -static_cast<double>(total) * std::log(*cfg.dequantization_bins);
  }

  const AugmentedSolution sol = integrate_divergence(field, x_t, t, T, cfg.divergence, cfg.solver, sample_index);
  const double prior = prior_logp(field.prior(), sol.x_T);
  std::size_t probes = 0;
  std::uint64_t seed = 0;
  if (const auto* p = std::get_if<TraceProbeConfig>(&cfg.divergence)) {
    probes = p->num_probes;
    seed = p->seed;
  }
  return LikelihoodResult(prior, sol.div_integral, dequant, std::move(shape), sol.nfe, field.mode(), t, probes, seed,
                          sol.x_T);
}

LikelihoodResult log_likelihood(const FlowField& field, const Vector& x0, const LikelihoodConfig& cfg,
                                std::uint64_t sample_index) {
  return log_likelihood_at_time(field, x0, cfg.solver.t_min, cfg, sample_index);
}

std::vector<LikelihoodRow> log_likelihood_batch(const std::function<FlowField(std::size_t)>& field_for,
                                                std::span<const Vector> samples, const LikelihoodConfig& cfg,
                                                std::size_t workers) {
  std::vector<LikelihoodRow> rows(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    rows[i].sample_id = i;
    try {
      rows[i].result = log_likelihood(field_for(i), samples[i], cfg, i);
    } catch (const Error& e) {
      rows[i].error = e.what();
    }
  });
  return rows;
}

void write_likelihood_csv(std::ostream& out, std::span<const LikelihoodRow> rows) {
  out << "sample_id,t,logp,prior_logp,div_integral,bpd,nfe,field_mode,num_probes,seed\n";
  for (const LikelihoodRow& row : rows) {
    if (!row.result) continue;
    const LikelihoodResult& r = *row.result;
    out << row.sample_id << ',' << detail::num17(r.t_start()) << ',' << detail::num17(r.logp()) << ','
        << detail::num17(r.prior_logp()) << ',' << detail::num17(r.div_integral()) << ',' << detail::num17(r.bpd())
        << ',' << r.nfe() << ',' << r.field_mode().describe() << ',' << r.num_probes() << ',' << r.seed() << '\n';
  }
}

}  // namespace flowlik
