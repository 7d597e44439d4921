#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flowlik/flow.hpp"
#include "flowlik/integrate.hpp"
#include "flowlik/sde.hpp"

namespace flowlik {

enum class ProbeDistribution { Rademacher, Gaussian };

/// Probes are drawn once per trajectory from Rng::stream(seed, sample_index)
/// and held fixed while the augmented ODE is integrated.
struct TraceProbeConfig {
  ProbeDistribution distribution = ProbeDistribution::Rademacher;
  std::size_t num_probes = 64;
  std::uint64_t seed = 0;
};

struct ExactDivergence {};

using DivergenceMethod = std::variant<ExactDivergence, TraceProbeConfig>;

inline constexpr Index kExactDivergenceMaxDim = 64;

/// Trace of the input Jacobian, one VJP per basis vector. ContractError above 64 dimensions.
double divergence_exact(const VectorField& field, const Vector& x, double t);

/// Columns are probe vectors.
Matrix draw_probes(ProbeDistribution distribution, Index dim, std::size_t count, Rng& rng);
Matrix draw_probes(const TraceProbeConfig& cfg, Index dim, std::uint64_t sample_index);

/// eps_i^T J eps_i for every probe column.
Vector hutchinson_terms(const VectorField& field, const Vector& x, double t, const Matrix& probes);
/// Mean of hutchinson_terms.
double divergence_hutchinson(const VectorField& field, const Vector& x, double t, const Matrix& probes);
double divergence_hutchinson(const VectorField& field, const Vector& x, double t, const TraceProbeConfig& cfg,
                             std::uint64_t sample_index = 0);

/// -logp log2(e) / prod(shape). ContractError for an empty shape or a zero extent.
double bpd(double logp, std::span<const std::size_t> shape);

struct LikelihoodConfig {
  DivergenceMethod divergence = ExactDivergence{};
  SolverConfig solver{};
  /// Data shape for BPD; empty means {dim}.
  std::vector<std::size_t> shape;
  /// Uniform dequantisation with this many bins per unit interval: subtracts
  /// ln(bins) per dimension from logp. Off by default (continuous data).
  std::optional<double> dequantization_bins;
};

/// logp = prior_logp + div_integral holds exactly: logp is computed from the
/// two terms at construction and never set independently.
class LikelihoodResult {
 public:
  LikelihoodResult(double prior_logp, double div_integral, double dequant_correction, std::vector<std::size_t> shape,
                   std::size_t nfe, FieldMode mode, double t_start, std::size_t num_probes, std::uint64_t seed,
                   Vector x_T);

  double logp() const { return logp_; }
  double prior_logp() const { return prior_logp_; }
  double div_integral() const { return div_integral_; }
  double bpd() const { return bpd_; }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t nfe() const { return nfe_; }
  const FieldMode& field_mode() const { return mode_; }
  double t_start() const { return t_start_; }
  std::size_t num_probes() const { return num_probes_; }  // 0 for exact divergence
  std::uint64_t seed() const { return seed_; }
  /// State reached at the terminal time.
  const Vector& x_T() const { return x_T_; }

 private:
  double prior_logp_;
  double div_integral_;
  double logp_;
  double bpd_;
  std::vector<std::size_t> shape_;
  std::size_t nfe_;
  FieldMode mode_;
  double t_start_;
  std::size_t num_probes_;
  std::uint64_t seed_;
  Vector x_T_;
};

/// Integrates the augmented state (x, l) with dx = H dt, dl = div H dt from
/// t_start to T and returns (x_T, l(T), nfe). Works for any VectorField.
struct AugmentedSolution {
  Vector x_T;
  double div_integral = 0.0;
  std::size_t nfe = 0;
};
AugmentedSolution integrate_divergence(const VectorField& field, const Vector& x, double t_start, double t_end,
                                       const DivergenceMethod& method, const SolverConfig& solver,
                                       std::uint64_t sample_index);

/// log p_{t_min}(x0) via the instantaneous change of variables.
LikelihoodResult log_likelihood(const FlowField& field, const Vector& x0, const LikelihoodConfig& cfg,
                                std::uint64_t sample_index = 0);

/// log p_t(x_t), integrating from t to T. At t = T this is the prior term alone.
LikelihoodResult log_likelihood_at_time(const FlowField& field, const Vector& x_t, double t,
                                        const LikelihoodConfig& cfg, std::uint64_t sample_index = 0);

struct LikelihoodRow {
  std::size_t sample_id = 0;
  std::optional<LikelihoodResult> result;
  std::string error;  // set when result is empty
};

/// One likelihood per sample, in parallel; sample i uses probe stream i.
/// Failures are captured per row instead of aborting the batch.
std::vector<LikelihoodRow> log_likelihood_batch(const std::function<FlowField(std::size_t)>& field_for,
                                                std::span<const Vector> samples, const LikelihoodConfig& cfg,
                                                std::size_t workers = 1);

/// Header: sample_id,t,logp,prior_logp,div_integral,bpd,nfe,field_mode,num_probes,seed.
/// Failed rows are skipped. Numbers use 17 significant digits.
void write_likelihood_csv(std::ostream& out, std::span<const LikelihoodRow> rows);

}  // namespace flowlik
