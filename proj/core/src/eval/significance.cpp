#include "flowlik/eval/significance.hpp"

#include <algorithm>
#include <cmath>

#include "flowlik/errors.hpp"

namespace flowlik::eval {

double matched_pairs_test(std::span<const double> errors_a, std::span<const double> errors_b) {
  if (errors_a.size() != errors_b.size()) throw ContractError("matched_pairs_test: length mismatch");
  if (errors_a.empty()) throw ContractError("matched_pairs_test: empty input");
  const double n = static_cast<double>(errors_a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < errors_a.size(); ++i) mean += errors_a[i] - errors_b[i];
  mean /= n;
  double ss = 0.0;
  bool all_zero = true;
  for (std::size_t i = 0; i < errors_a.size(); ++i) {
    const double d = errors_a[i] - errors_b[i];
    if (d != 0.0) all_zero = false;
    ss += (d - mean) * (d - mean);
  }
  if (all_zero) return 1.0;
  const double sd = errors_a.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  if (sd == 0.0) return std::min(1.0, 2.0 * std::pow(0.5, n));
  const double z = mean / (sd / std::sqrt(n));
  return std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0);
}

}  // namespace flowlik::eval
