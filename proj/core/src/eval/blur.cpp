#include "flowlik/eval/blur.hpp"

#include <cmath>

#include "flowlik/errors.hpp"

namespace flowlik::eval {

Matrix BlurKernel::taps() const {
  if (size < 1 || size % 2 == 0) throw ConfigError("blur: kernel size must be odd and positive");
  if (!(sigma > 0.0)) throw ConfigError("blur: kernel sigma must be positive");
  const int r = size / 2;
  Matrix k(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double di = i - r;
      const double dj = j - r;
      k(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
    }
  return k / k.sum();
}

namespace {

Index reflect101(Index i, Index n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

}  // namespace

Matrix blur(const Matrix& grid, const BlurKernel& kernel) {
  const Matrix taps = kernel.taps();
  const Index r = kernel.size / 2;
  if (grid.rows() <= r || grid.cols() <= r) {
    throw ContractError("blur: grid is smaller than the kernel radius + 1");
  }
  Matrix out = Matrix::Zero(grid.rows(), grid.cols());
  for (Index i = 0; i < grid.rows(); ++i)
    for (Index j = 0; j < grid.cols(); ++j) {
      double acc = 0.0;
      for (Index a = 0; a < taps.rows(); ++a)
        for (Index b = 0; b < taps.cols(); ++b)
          acc += taps(a, b) * grid(reflect101(i + a - r, grid.rows()), reflect101(j + b - r, grid.cols()));
      out(i, j) = acc;
    }
  return out;
}

double cosine_similarity(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractError("cosine_similarity: shape mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.cwiseProduct(b).sum() / (na * nb);
}

AdaptResult blur_adapt(const Matrix& grid, const std::function<FlowField(const Condition&)>& field,
                       const Matrix& clean_mean, const AdaptConfig& cfg, std::uint64_t sample_index) {
  if (!field) throw ContractError("blur_adapt: missing field factory");
  Matrix blurred = blur(grid, cfg.kernel);
  const FlowField f = field(Condition::grid_mean(blurred));
  if (f.dim() != grid.size()) throw ContractError("blur_adapt: field dimension does not match the grid");

  LikelihoodConfig lik = cfg.likelihood;
  if (lik.shape.empty()) lik.shape = {static_cast<std::size_t>(grid.rows()), static_cast<std::size_t>(grid.cols())};

  const Vector x = flatten_grid(grid);
  LikelihoodResult input = log_likelihood(f, x, lik, sample_index);
  const Reconstruction rec = reconstruct(f, x, cfg.forward, cfg.reverse);
  LikelihoodResult output = log_likelihood(f, rec.x0, lik, sample_index);
  Matrix adapted = unflatten_grid(rec.x0, grid.rows(), grid.cols());

  const double in_sim = cosine_similarity(grid, clean_mean);
  const double out_sim = cosine_similarity(adapted, clean_mean);
  return AdaptResult{std::move(blurred), std::move(adapted), std::move(input), std::move(output), in_sim, out_sim};
}

}  // namespace flowlik::eval
