#pragma once

#include <memory>
#include <variant>

#include "flowlik/condition.hpp"
#include "flowlik/mlp.hpp"
#include "flowlik/sde.hpp"
#include "flowlik/types.hpp"

namespace flowlik {

/// Data ~ N(mean, diag(var)).
struct AnalyticGaussian {
  Vector mean;
  Vector var;
};

/// Data ~ sum_k weights_k N(means.row(k), var I).
struct AnalyticGmm {
  Vector weights;
  Matrix means;  // components x dim
  double var = 1.0;
};

/// Trained network; the score is network output divided by std(t).
struct MlpScore {
  std::shared_ptr<const NetworkParams> params;
};

/// Score of the marginal p_t under `sde`.
///
/// Scores always live in variance-preserving coordinates. For a DdimSigma sde
/// the analytic fields use the VP kernel of the same schedule, and the flow
/// module evaluates them at x / sqrt(sigma^2 + 1).
class ScoreField {
 public:
  using Impl = std::variant<AnalyticGaussian, AnalyticGmm, MlpScore>;

  ScoreField(Impl impl, SdeSpec sde);

  static ScoreField gaussian(Vector mean, Vector var, SdeSpec sde);
  static ScoreField gmm(Vector weights, Matrix means, double var, SdeSpec sde);
  static ScoreField mlp(std::shared_ptr<const NetworkParams> params, SdeSpec sde);

  const Impl& impl() const { return impl_; }
  const SdeSpec& sde() const { return sde_; }
  Index dim() const { return dim_; }
  bool is_analytic() const { return !std::holds_alternative<MlpScore>(impl_); }

 private:
  Impl impl_;
  SdeSpec sde_;
  Index dim_ = 0;
};

struct GuidanceConfig {
  double omega = 1.0;
};

/// grad_x log p_t(x | c). For AnalyticGmm a ClassLabel restricts the mixture to that component.
Vector score_eval(const ScoreField& field, const Vector& x, double t, const Condition& c);

/// v^T d(score)/dx.
Vector score_vjp(const ScoreField& field, const Vector& x, double t, const Condition& c, const Vector& v);

/// Column i of the result is score_vjp(..., vs.col(i)). Shares one forward pass for networks.
Matrix score_vjp_many(const ScoreField& field, const Vector& x, double t, const Condition& c, const Matrix& vs);

/// s_u + omega (s_c - s_u), evaluated as (1 - omega) s_u + omega s_c so that
/// omega = 0 and omega = 1 return s_u and s_c bit-for-bit. ContractError when c is Null.
Vector cfg_score(const ScoreField& field, const Vector& x, double t, const Condition& c, const GuidanceConfig& g);
Matrix cfg_vjp_many(const ScoreField& field, const Vector& x, double t, const Condition& c, const GuidanceConfig& g,
                    const Matrix& vs);

/// Closed-form log p_t(x | c) for analytic fields; ContractError for networks.
double log_marginal_density(const ScoreField& field, const Vector& x, double t, const Condition& c);

/// Kernel used by the score in its own coordinates (VP kernel for DdimSigma).
MarginalKernel score_kernel(const SdeSpec& sde, const Condition& c, Index dim, double t);

}  // namespace flowlik
