#include "flowlik/score.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "flowlik/errors.hpp"

namespace flowlik {

namespace {

Index impl_dim(const ScoreField::Impl& impl) {
  return std::visit(
      [](const auto& f) -> Index {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AnalyticGaussian>) {
          return f.mean.size();
        } else if constexpr (std::is_same_v<T, AnalyticGmm>) {
          return f.means.cols();
        } else {
          if (!f.params) throw ConfigError("network score field without parameters");
          return f.params->shape().data_dim;
        }
      },
      impl);
}

void validate_impl(const ScoreField::Impl& impl) {
  if (const auto* g = std::get_if<AnalyticGaussian>(&impl)) {
    if (g->mean.size() != g->var.size()) throw ConfigError("gaussian mean and variance sizes differ");
    if (g->mean.size() == 0) throw ConfigError("gaussian score needs dimension >= 1");
    if (!(g->var.array() > 0.0).all()) throw ConfigError("gaussian variances must be > 0");
  } else if (const auto* m = std::get_if<AnalyticGmm>(&impl)) {
    if (m->weights.size() == 0 || m->weights.size() != m->means.rows()) {
      throw ConfigError("gmm needs one weight per component row");
    }
    if (m->means.cols() == 0) throw ConfigError("gmm score needs dimension >= 1");
    if (!(m->weights.array() > 0.0).all()) throw ConfigError("gmm weights must be > 0");
    if (std::abs(m->weights.sum() - 1.0) > 1e-12) throw ConfigError("gmm weights must sum to 1");
    if (!(m->var > 0.0)) throw ConfigError("gmm variance must be > 0");
  }
}

void check_x(const ScoreField& field, const Vector& x) {
  if (x.size() != field.dim()) {
    throw ContractError("score field has dimension " + std::to_string(field.dim()) + ", got " +
                        std::to_string(x.size()));
  }
}

// Component means and shared variance of the mixture pushed through the kernel.
struct PushedGmm {
  Matrix means;  // K x d
  Vector log_weights;
  double var = 1.0;
};

PushedGmm push_gmm(const AnalyticGmm& g, const MarginalKernel& k, const Condition& c) {
  PushedGmm p;
  p.var = k.mean_coeff * k.mean_coeff * g.var + k.std * k.std;
  if (c.kind() == Condition::Kind::ClassLabel) {
    const std::size_t idx = std::get<Condition::ClassLabel>(c.value()).index;
    if (idx >= static_cast<std::size_t>(g.means.rows())) {
      throw ContractError("class label " + std::to_string(idx) + " outside the mixture's " +
                          std::to_string(g.means.rows()) + " components");
    }
    p.means = (k.mean_coeff * g.means.row(static_cast<Index>(idx)) + k.mean_offset.transpose());
    p.log_weights = Vector::Zero(1);
  } else {
    p.means = (k.mean_coeff * g.means).rowwise() + k.mean_offset.transpose();
    p.log_weights = g.weights.array().log();
  }
  return p;
}

// log N(x; mean_k, var I) + log w_k for each component.
Vector component_logits(const PushedGmm& p, const Vector& x) {
  const double d = static_cast<double>(x.size());
  Vector z(p.means.rows());
  for (Index k = 0; k < p.means.rows(); ++k) {
    z[k] = p.log_weights[k] - 0.5 * (x.transpose() - p.means.row(k)).squaredNorm() / p.var -
           0.5 * d * std::log(2.0 * std::numbers::pi * p.var);
  }
  return z;
}

double log_sum_exp(const Vector& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

Vector responsibilities(const Vector& z) {
  const double m = z.maxCoeff();
  Vector r = (z.array() - m).exp();
  return r / r.sum();
}

// Per-component scores as columns (d x K).
Matrix component_scores(const PushedGmm& p, const Vector& x) {
  Matrix s(x.size(), p.means.rows());
  for (Index k = 0; k < p.means.rows(); ++k) s.col(k) = (p.means.row(k).transpose() - x) / p.var;
  return s;
}

double network_std(const MarginalKernel& k) {
  if (!(k.std > 0.0)) throw DomainError("network score is undefined where std(t) = 0");
  return k.std;
}

}  // namespace

ScoreField::ScoreField(Impl impl, SdeSpec sde) : impl_(std::move(impl)), sde_(std::move(sde)) {
  validate_impl(impl_);
  sde_.schedule.validate();
  dim_ = impl_dim(impl_);
}

ScoreField ScoreField::gaussian(Vector mean, Vector var, SdeSpec sde) {
  return ScoreField(AnalyticGaussian{std::move(mean), std::move(var)}, std::move(sde));
}

ScoreField ScoreField::gmm(Vector weights, Matrix means, double var, SdeSpec sde) {
  return ScoreField(AnalyticGmm{std::move(weights), std::move(means), var}, std::move(sde));
}

ScoreField ScoreField::mlp(std::shared_ptr<const NetworkParams> params, SdeSpec sde) {
  return ScoreField(MlpScore{std::move(params)}, std::move(sde));
}

MarginalKernel score_kernel(const SdeSpec& sde, const Condition& c, Index dim, double t) {
  if (sde.variant == SdeVariant::DdimSigma) return marginal(SdeSpec::vp(sde.schedule), dim, t);
  return marginal(bind_condition(sde, c), dim, t);
}

Vector score_eval(const ScoreField& field, const Vector& x, double t, const Condition& c) {
  check_x(field, x);
  const MarginalKernel k = score_kernel(field.sde(), c, field.dim(), t);
  return std::visit(
      [&](const auto& f) -> Vector {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AnalyticGaussian>) {
          const Vector mean = k.mean(f.mean);
          const Vector var = (k.mean_coeff * k.mean_coeff) * f.var.array() + k.std * k.std;
          return -((x - mean).array() / var.array()).matrix();
        } else if constexpr (std::is_same_v<T, AnalyticGmm>) {
          const PushedGmm p = push_gmm(f, k, c);
          return component_scores(p, x) * responsibilities(component_logits(p, x));
        } else {
          const double s = network_std(k);
          const MlpTape tape = mlp_forward(*f.params, network_input(*f.params, x, t, c));
          return tape.output / s;
        }
      },
      field.impl());
}

Matrix score_vjp_many(const ScoreField& field, const Vector& x, double t, const Condition& c, const Matrix& vs) {
  check_x(field, x);
  if (vs.rows() != field.dim()) throw ContractError("score_vjp: cotangent dimension mismatch");
  const MarginalKernel k = score_kernel(field.sde(), c, field.dim(), t);
  return std::visit(
      [&](const auto& f) -> Matrix {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AnalyticGaussian>) {
          const Vector var = (k.mean_coeff * k.mean_coeff) * f.var.array() + k.std * k.std;
          return -(var.cwiseInverse().asDiagonal() * vs);
        } else if constexpr (std::is_same_v<T, AnalyticGmm>) {
          // J = sum_k r_k s_k s_k^T - sbar sbar^T - I / var (symmetric).
          const PushedGmm p = push_gmm(f, k, c);
          const Vector r = responsibilities(component_logits(p, x));
          const Matrix S = component_scores(p, x);
          const Vector sbar = S * r;
          const Matrix proj = S.transpose() * vs;  // K x m
          Matrix out = S * (r.asDiagonal() * proj);
          out -= sbar * (sbar.transpose() * vs);
          out -= vs / p.var;
          return out;
        } else {
          const double s = network_std(k);
          const NetworkParams& params = *f.params;
          const MlpTape tape = mlp_forward(params, network_input(params, x, t, c));
          Matrix out(vs.rows(), vs.cols());
          for (Index i = 0; i < vs.cols(); ++i) {
            out.col(i) = mlp_input_vjp(params, tape, vs.col(i) / s).head(field.dim());
          }
          return out;
        }
      },
      field.impl());
}

Vector score_vjp(const ScoreField& field, const Vector& x, double t, const Condition& c, const Vector& v) {
  return score_vjp_many(field, x, t, c, v);
}

Vector cfg_score(const ScoreField& field, const Vector& x, double t, const Condition& c, const GuidanceConfig& g) {
  if (c.is_null()) throw ContractError("guidance of the null condition is undefined");
  const Vector sc = score_eval(field, x, t, c);
  const Vector su = score_eval(field, x, t, Condition::null());
  return (1.0 - g.omega) * su + g.omega * sc;
}

Matrix cfg_vjp_many(const ScoreField& field, const Vector& x, double t, const Condition& c, const GuidanceConfig& g,
                    const Matrix& vs) {
  if (c.is_null()) throw ContractError("guidance of the null condition is undefined");
  const Matrix jc = score_vjp_many(field, x, t, c, vs);
  const Matrix ju = score_vjp_many(field, x, t, Condition::null(), vs);
  return (1.0 - g.omega) * ju + g.omega * jc;
}

double log_marginal_density(const ScoreField& field, const Vector& x, double t, const Condition& c) {
  check_x(field, x);
  const MarginalKernel k = score_kernel(field.sde(), c, field.dim(), t);
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AnalyticGaussian>) {
          const Vector mean = k.mean(f.mean);
          const Vector var = (k.mean_coeff * k.mean_coeff) * f.var.array() + k.std * k.std;
          double lp = 0.0;
          for (Index i = 0; i < x.size(); ++i) {
            const double r = x[i] - mean[i];
            lp += -0.5 * std::log(2.0 * std::numbers::pi * var[i]) - 0.5 * r * r / var[i];
          }
          return lp;
        } else if constexpr (std::is_same_v<T, AnalyticGmm>) {
          return log_sum_exp(component_logits(push_gmm(f, k, c), x));
        } else {
          throw ContractError("closed-form density is only available for analytic score fields");
        }
      },
      field.impl());
}

}  // namespace flowlik
