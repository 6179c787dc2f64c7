#pragma once

#include <Eigen/Dense>

namespace levycouple {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec unit_vec(int d, int axis = 0) {
    Vec e = Vec::Zero(d);
    e[axis] = 1.0;
    return e;
}

} // namespace levycouple
