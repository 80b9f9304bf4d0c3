#pragma once

#include <Eigen/Dense>

namespace randcontrol {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace randcontrol
