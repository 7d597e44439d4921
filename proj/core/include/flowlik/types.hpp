#pragma once

#include <Eigen/Core>

namespace flowlik {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace flowlik
