#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>

#include "flowlik/sde.hpp"
#include "flowlik/types.hpp"

namespace flowlik {

/// Conditioning signal. Null is the unconditional token used by guidance.
class Condition {
 public:
  struct Null {
    bool operator==(const Null&) const = default;
  };
  struct ClassLabel {
    std::size_t index = 0;
    bool operator==(const ClassLabel&) const = default;
  };
  struct Embedding {
    Vector values;
    bool operator==(const Embedding& o) const { return values.size() == o.values.size() && values == o.values; }
  };
  struct GridMean {
    Matrix grid;
    bool operator==(const GridMean& o) const {
      return grid.rows() == o.grid.rows() && grid.cols() == o.grid.cols() && grid == o.grid;
    }
  };
  enum class Kind { Null, ClassLabel, Embedding, GridMean };

  Condition() = default;
  static Condition null() { return Condition{}; }
  static Condition class_label(std::size_t index) { return Condition{ClassLabel{index}}; }
  static Condition embedding(Vector values) { return Condition{Embedding{std::move(values)}}; }
  static Condition grid_mean(Matrix grid) { return Condition{GridMean{std::move(grid)}}; }

  Kind kind() const { return static_cast<Kind>(value_.index()); }
  bool is_null() const { return kind() == Kind::Null; }
  const auto& value() const { return value_; }

  /// Vector carried by the condition: embedding values or the grid flattened
  /// row-major. Empty for Null and ClassLabel.
  std::optional<Vector> mean_vector() const;

  std::string describe() const;

  bool operator==(const Condition&) const = default;

 private:
  template <class T>
  explicit Condition(T v) : value_(std::move(v)) {}

  std::variant<Null, ClassLabel, Embedding, GridMean> value_;
};

/// Row-major flattening shared by GridMean conditions and grid datasets.
Vector flatten_grid(const Matrix& grid);
Matrix unflatten_grid(const Vector& values, Index rows, Index cols);

/// For MRVP, the condition's vector (when it carries one) becomes mu; other
/// variants are returned unchanged. Validates the result.
SdeSpec bind_condition(const SdeSpec& sde, const Condition& c);

}  // namespace flowlik
