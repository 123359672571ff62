#pragma once

#include <Eigen/Dense>
#include <vector>

namespace adrl {

using Vector = Eigen::VectorXd;
/// Column-major. Batches keep one sample per column.
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Flat parameter or gradient storage. A fixed base alignment keeps vectorized
/// kernels on the same code path, so results do not depend on where the heap put it.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

}  // namespace adrl
