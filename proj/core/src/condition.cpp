#include "flowlik/condition.hpp"

#include <sstream>

#include "flowlik/errors.hpp"

namespace flowlik {

Vector flatten_grid(const Matrix& grid) {
  Vector v(grid.size());
  Index k = 0;
  for (Index r = 0; r < grid.rows(); ++r)
    for (Index c = 0; c < grid.cols(); ++c) v[k++] = grid(r, c);
  return v;
}

Matrix unflatten_grid(const Vector& values, Index rows, Index cols) {
  if (values.size() != rows * cols) throw ContractError("unflatten_grid: size does not match rows x cols");
  Matrix m(rows, cols);
  Index k = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = values[k++];
  return m;
}

std::optional<Vector> Condition::mean_vector() const {
  if (const auto* e = std::get_if<Embedding>(&value_)) return e->values;
  if (const auto* g = std::get_if<GridMean>(&value_)) return flatten_grid(g->grid);
  return std::nullopt;
}

std::string Condition::describe() const {
  std::ostringstream os;
  switch (kind()) {
    case Kind::Null:
      os << "null";
      break;
    case Kind::ClassLabel:
      os << "class:" << std::get<ClassLabel>(value_).index;
      break;
    case Kind::Embedding:
      os << "embedding[" << std::get<Embedding>(value_).values.size() << "]";
      break;
    case Kind::GridMean: {
      const auto& g = std::get<GridMean>(value_).grid;
      os << "grid[" << g.rows() << "x" << g.cols() << "]";
      break;
    }
  }
  return os.str();
}

SdeSpec bind_condition(const SdeSpec& sde, const Condition& c) {
  SdeSpec bound = sde;
  if (sde.variant == SdeVariant::MRVP) {
    if (auto mu = c.mean_vector()) bound.condition_mean = std::move(*mu);
  }
  bound.validate();
  return bound;
}

}  // namespace flowlik
