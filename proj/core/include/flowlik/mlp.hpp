#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "flowlik/condition.hpp"
#include "flowlik/types.hpp"

namespace flowlik {

enum class Activation { Silu, Tanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Layer chain of the score network. The input is the concatenation
/// [x (data_dim), time features (time_embed_dim), condition (cond_dim)];
/// the output has data_dim entries. A learned table of num_classes rows
/// of width cond_dim embeds ClassLabel conditions.
struct MlpShape {
  int data_dim = 2;
  std::vector<int> hidden{64, 64};
  int time_embed_dim = 8;
  int cond_dim = 0;
  int num_classes = 0;
  Activation activation = Activation::Silu;

  int input_dim() const { return data_dim + time_embed_dim + cond_dim; }
  /// (fan_in, fan_out) per affine layer.
  std::vector<std::pair<int, int>> layers() const;
  Index param_count() const;
  void validate() const;

  bool operator==(const MlpShape&) const = default;
};

/// All parameters live in one flat vector. Per layer: weight (fan_out x fan_in,
/// column-major) then bias; the class-embedding table (num_classes x cond_dim,
/// column-major) comes last.
class NetworkParams {
 public:
  NetworkParams() = default;
  NetworkParams(MlpShape shape, Vector values);

  /// Xavier-uniform weights, zero biases, N(0, 1) class embeddings.
  static NetworkParams init(const MlpShape& shape, std::uint64_t seed);

  const MlpShape& shape() const { return shape_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<const Vector> bias(std::size_t layer) const;
  Eigen::Map<const Matrix> class_table() const;

  Index weight_offset(std::size_t layer) const { return offsets_[layer]; }
  Index class_table_offset() const { return table_offset_; }

  bool all_finite() const { return values_.allFinite(); }

 private:
  void compute_offsets();

  MlpShape shape_;
  Vector values_;
  std::vector<Index> offsets_;
  Index table_offset_ = 0;
};

/// Sinusoidal time features: sin(w_k t), cos(w_k t) with w_k = (pi / 2) 2^k.
Vector time_features(double t, int dim);

/// Network input for (x, t, c). Null maps to a zero condition block.
Vector network_input(const NetworkParams& params, const Vector& x, double t, const Condition& c);

/// Activations recorded by a forward pass, consumed by the backward passes.
struct MlpTape {
  std::vector<Vector> inputs;       // input to each layer
  std::vector<Vector> preacts;      // pre-activation of each hidden layer
  Vector output;
};

MlpTape mlp_forward(const NetworkParams& params, const Vector& input);

/// grad_output^T d(output)/d(input).
Vector mlp_input_vjp(const NetworkParams& params, const MlpTape& tape, const Vector& grad_output);

/// Accumulates grad_output^T d(output)/d(theta) into `grad` (same layout as
/// values()). Returns the gradient with respect to the network input. The
/// class-table entries are not touched; see accumulate_condition_grad.
Vector mlp_param_vjp(const NetworkParams& params, const MlpTape& tape, const Vector& grad_output, Vector& grad);

/// Routes the condition block of an input gradient into the class table.
void accumulate_condition_grad(const NetworkParams& params, const Condition& c, const Vector& input_grad,
                               Vector& grad);

}  // namespace flowlik
