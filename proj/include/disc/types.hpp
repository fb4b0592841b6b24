#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace disc {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;
using IndexSet = std::vector<Index>;

/// Binary labels live in {-1, +1}; heads and per-class tables use 0/1.
inline int class_index(int label) { return label > 0 ? 1 : 0; }
inline int class_label(int index) { return index > 0 ? 1 : -1; }
inline constexpr int kNumClasses = 2;

/// Gather rows of `source` listed in `rows`.
template <typename Derived>
MatrixX<typename Derived::Scalar> gather_rows(const Eigen::MatrixBase<Derived>& source,
                                              const IndexSet& rows) {
  MatrixX<typename Derived::Scalar> out(static_cast<Index>(rows.size()), source.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = source.row(rows[r]);
  return out;
}

inline IntVector gather(const IntVector& source, const IndexSet& rows) {
  IntVector out(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r)) = source(rows[r]);
  return out;
}

}  // namespace disc
