#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace collabrec {

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Row-major so that embedding-table rows are contiguous.
template <class T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatF = MatT<float>;
using MatD = MatT<double>;

using UserIdx = int32_t;
using ItemIdx = int32_t;
using Timestamp = int64_t;

}  // namespace collabrec
