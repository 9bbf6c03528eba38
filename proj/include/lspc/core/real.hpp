#pragma once

#include <Eigen/Dense>

namespace lspc {

#ifdef LSPC_DOUBLE_PRECISION
using Real = double;
#else
using Real = float;
#endif

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using VecD = Vec<double>;
using MatD = Mat<double>;
using RowVecD = RowVec<double>;

}  // namespace lspc
