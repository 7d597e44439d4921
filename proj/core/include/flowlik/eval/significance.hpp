#pragma once

#include <span>

namespace flowlik::eval {

/// Two-sided matched-pairs test on d_i = a_i - b_i using the normal
/// approximation z = mean(d) / (sd(d) / sqrt(n)).
/// All d_i == 0 gives p = 1. When sd(d) == 0 with a nonzero mean the test
/// falls back to the sign pattern: p = min(1, 2 * 0.5^n).
/// ContractError on length mismatch or empty input.
double matched_pairs_test(std::span<const double> errors_a, std::span<const double> errors_b);

}  // namespace flowlik::eval
