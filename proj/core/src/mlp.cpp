#include "flowlik/mlp.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "flowlik/errors.hpp"
#include "flowlik/random.hpp"

namespace flowlik {

std::string_view to_string(Activation a) { return a == Activation::Silu ? "silu" : "tanh"; }

Activation parse_activation(std::string_view name) {
  if (name == "silu") return Activation::Silu;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected silu|tanh)");
}

std::vector<std::pair<int, int>> MlpShape::layers() const {
  std::vector<std::pair<int, int>> out;
  int fan_in = input_dim();
  for (int h : hidden) {
    out.emplace_back(fan_in, h);
    fan_in = h;
  }
  out.emplace_back(fan_in, data_dim);
  return out;
}

Index MlpShape::param_count() const {
  Index n = 0;
  for (auto [in, out] : layers()) n += static_cast<Index>(in) * out + out;
  return n + static_cast<Index>(num_classes) * cond_dim;
}

void MlpShape::validate() const {
  if (data_dim < 1) throw ConfigError("network data_dim must be >= 1");
  if (time_embed_dim < 0 || time_embed_dim % 2 != 0) throw ConfigError("time_embed_dim must be even and >= 0");
  if (cond_dim < 0) throw ConfigError("cond_dim must be >= 0");
  if (num_classes < 0) throw ConfigError("num_classes must be >= 0");
  if (num_classes > 0 && cond_dim == 0) throw ConfigError("class embeddings need cond_dim > 0");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden widths must be >= 1");
}

NetworkParams::NetworkParams(MlpShape shape, Vector values) : shape_(std::move(shape)), values_(std::move(values)) {
  shape_.validate();
  if (values_.size() != shape_.param_count()) {
    throw ContractError("parameter vector has " + std::to_string(values_.size()) + " entries, shape needs " +
                        std::to_string(shape_.param_count()));
  }
  compute_offsets();
}

void NetworkParams::compute_offsets() {
  offsets_.clear();
  Index off = 0;
  for (auto [in, out] : shape_.layers()) {
    offsets_.push_back(off);
    off += static_cast<Index>(in) * out + out;
  }
  table_offset_ = off;
}

NetworkParams NetworkParams::init(const MlpShape& shape, std::uint64_t seed) {
  shape.validate();
  Rng rng(seed);
  Vector v = Vector::Zero(shape.param_count());
  Index off = 0;
  for (auto [in, out] : shape.layers()) {
    const double limit = std::sqrt(6.0 / (in + out));
    for (Index i = 0; i < static_cast<Index>(in) * out; ++i) v[off + i] = rng.uniform(-limit, limit);
    off += static_cast<Index>(in) * out + out;
  }
  for (Index i = off; i < v.size(); ++i) v[i] = rng.normal();
  return NetworkParams(shape, std::move(v));
}

Eigen::Map<const Matrix> NetworkParams::weight(std::size_t layer) const {
  const auto [in, out] = shape_.layers()[layer];
  return {values_.data() + offsets_[layer], out, in};
}

Eigen::Map<const Vector> NetworkParams::bias(std::size_t layer) const {
  const auto [in, out] = shape_.layers()[layer];
  return {values_.data() + offsets_[layer] + static_cast<Index>(in) * out, out};
}

Eigen::Map<const Matrix> NetworkParams::class_table() const {
  return {values_.data() + table_offset_, shape_.num_classes, shape_.cond_dim};
}

Vector time_features(double t, int dim) {
  Vector f(dim);
  for (int k = 0; k < dim / 2; ++k) {
    const double w = 0.5 * std::numbers::pi * std::ldexp(1.0, k);
    f[2 * k] = std::sin(w * t);
    f[2 * k + 1] = std::cos(w * t);
  }
  return f;
}

Vector network_input(const NetworkParams& params, const Vector& x, double t, const Condition& c) {
  const MlpShape& s = params.shape();
  if (x.size() != s.data_dim) {
    throw ContractError("network expects data dimension " + std::to_string(s.data_dim) + ", got " +
                        std::to_string(x.size()));
  }
  Vector in(s.input_dim());
  in.head(s.data_dim) = x;
  in.segment(s.data_dim, s.time_embed_dim) = time_features(t, s.time_embed_dim);
  auto cond = in.tail(s.cond_dim);
  switch (c.kind()) {
    case Condition::Kind::Null:
      cond.setZero();
      break;
    case Condition::Kind::ClassLabel: {
      const std::size_t k = std::get<Condition::ClassLabel>(c.value()).index;
      if (k >= static_cast<std::size_t>(s.num_classes)) {
        throw ContractError("class label " + std::to_string(k) + " outside the network's " +
                            std::to_string(s.num_classes) + " classes");
      }
      cond = params.class_table().row(static_cast<Index>(k)).transpose();
      break;
    }
    case Condition::Kind::Embedding:
    case Condition::Kind::GridMean: {
      const Vector v = *c.mean_vector();
      if (v.size() != s.cond_dim) {
        throw ContractError("condition has dimension " + std::to_string(v.size()) + ", network expects " +
                            std::to_string(s.cond_dim));
      }
      cond = v;
      break;
    }
  }
  return in;
}

namespace {

double act(Activation a, double z) {
  if (a == Activation::Tanh) return std::tanh(z);
  return z / (1.0 + std::exp(-z));
}

double act_grad(Activation a, double z) {
  if (a == Activation::Tanh) {
    const double th = std::tanh(z);
    return 1.0 - th * th;
  }
  const double sg = 1.0 / (1.0 + std::exp(-z));
  return sg * (1.0 + z * (1.0 - sg));
}

}  // namespace

MlpTape mlp_forward(const NetworkParams& params, const Vector& input) {
  const std::size_t L = params.shape().layers().size();
  const Activation a = params.shape().activation;
  MlpTape tape;
  tape.inputs.reserve(L);
  tape.preacts.reserve(L - 1);
  Vector h = input;
  for (std::size_t l = 0; l < L; ++l) {
    tape.inputs.push_back(h);
    Vector z = params.weight(l) * h + params.bias(l);
    if (l + 1 == L) {
      tape.output = std::move(z);
    } else {
      h = z.unaryExpr([a](double v) { return act(a, v); });
      tape.preacts.push_back(std::move(z));
    }
  }
  return tape;
}

Vector mlp_input_vjp(const NetworkParams& params, const MlpTape& tape, const Vector& grad_output) {
  const std::size_t L = tape.inputs.size();
  const Activation a = params.shape().activation;
  Vector g = grad_output;
  for (std::size_t l = L; l-- > 0;) {
    if (l + 1 < L) g = g.cwiseProduct(tape.preacts[l].unaryExpr([a](double v) { return act_grad(a, v); }));
    g = params.weight(l).transpose() * g;
  }
  return g;
}

Vector mlp_param_vjp(const NetworkParams& params, const MlpTape& tape, const Vector& grad_output, Vector& grad) {
  const std::size_t L = tape.inputs.size();
  const Activation a = params.shape().activation;
  const auto layers = params.shape().layers();
  Vector g = grad_output;
  for (std::size_t l = L; l-- > 0;) {
    if (l + 1 < L) g = g.cwiseProduct(tape.preacts[l].unaryExpr([a](double v) { return act_grad(a, v); }));
    const auto [in, out] = layers[l];
    const Index off = params.weight_offset(l);
    Eigen::Map<Matrix> gw(grad.data() + off, out, in);
    Eigen::Map<Vector> gb(grad.data() + off + static_cast<Index>(in) * out, out);
    gw.noalias() += g * tape.inputs[l].transpose();
    gb += g;
    g = params.weight(l).transpose() * g;
  }
  return g;
}

void accumulate_condition_grad(const NetworkParams& params, const Condition& c, const Vector& input_grad,
                               Vector& grad) {
  if (c.kind() != Condition::Kind::ClassLabel) return;
  const MlpShape& s = params.shape();
  const Index k = static_cast<Index>(std::get<Condition::ClassLabel>(c.value()).index);
  Eigen::Map<Matrix> table(grad.data() + params.class_table_offset(), s.num_classes, s.cond_dim);
  table.row(k) += input_grad.tail(s.cond_dim).transpose();
}

}  // namespace flowlik
