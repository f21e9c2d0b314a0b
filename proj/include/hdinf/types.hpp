#pragma once

#include <Eigen/Dense>

namespace hdinf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace hdinf
