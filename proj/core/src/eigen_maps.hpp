#pragma once

#include <Eigen/Core>

#include "rankscl/tensor.hpp"

namespace rankscl::detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;

template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Views a tensor's storage as rows x cols (row-major).
template <typename T>
ConstMatrixMap<T> as_matrix(const Tensor<T>& t, Eigen::Index rows, Eigen::Index cols) {
  return ConstMatrixMap<T>(t.raw(), rows, cols);
}

template <typename T>
MatrixMap<T> as_matrix(Tensor<T>& t, Eigen::Index rows, Eigen::Index cols) {
  return MatrixMap<T>(t.raw(), rows, cols);
}

}  // namespace rankscl::detail
