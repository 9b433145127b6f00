#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace dna {

// Row-major so that sample rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using Index = std::size_t;
using IndexList = std::vector<Index>;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace dna
