#pragma once

#include <Eigen/Dense>

namespace errcalc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using Eigen::Index;

}  // namespace errcalc
