#pragma once

#include <cstdint>
#include <functional>

#include "flowlik/condition.hpp"
#include "flowlik/flow.hpp"
#include "flowlik/likelihood.hpp"

namespace flowlik::eval {

/// Normalised 2-D Gaussian taps.
struct BlurKernel {
  int size = 5;
  double sigma = 1.0;

  Matrix taps() const;
};

/// Correlates the grid with the kernel. Borders use reflect-101 padding
/// (index -1 maps to 1), so grids need at least size/2 + 1 cells per axis.
Matrix blur(const Matrix& grid, const BlurKernel& kernel);

/// cos(angle) between the flattened grids; 0 if either is all zeros.
double cosine_similarity(const Matrix& a, const Matrix& b);

struct AdaptConfig {
  BlurKernel kernel{};
  SolverConfig forward = SolverConfig::euler(10);
  SolverConfig reverse = SolverConfig::euler(10);
  LikelihoodConfig likelihood{};
};

struct AdaptResult {
  Matrix blurred;  // used as the MRVP condition mean
  Matrix adapted;
  LikelihoodResult input;   // input grid under the blurred condition
  LikelihoodResult output;  // adapted grid under the same condition
  /// Domain-shift proxy: cosine similarity to the clean-domain mean grid.
  double input_similarity = 0.0;
  double output_similarity = 0.0;
};

/// Blurs the grid, uses the blur as the condition mean (GridMean), and runs
/// the forward then reverse ODE starting from the input grid.
AdaptResult blur_adapt(const Matrix& grid, const std::function<FlowField(const Condition&)>& field,
                       const Matrix& clean_mean, const AdaptConfig& cfg, std::uint64_t sample_index = 0);

}  // namespace flowlik::eval
