#pragma once

#include <span>
#include <vector>

#include "hes/types.hpp"

namespace hes {

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Compressed sparse row matrix. Column indices are sorted and unique within
/// every row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(Index rows, Index cols, std::vector<Index> row_offsets,
               std::vector<Index> col_indices, std::vector<double> values);

  /// Duplicate (row, col) entries are summed.
  static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> triplets);
  static SparseMatrix identity(Index n);
  /// Keeps entries with value != 0.
  static SparseMatrix from_dense(const DenseMatrix& dense);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }

  const std::vector<Index>& row_offsets() const { return offsets_; }
  const std::vector<Index>& col_indices() const { return cols_idx_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const Index> row_cols(Index row) const {
    return {cols_idx_.data() + offsets_[row], static_cast<std::size_t>(offsets_[row + 1] - offsets_[row])};
  }
  std::span<const double> row_values(Index row) const {
    return {values_.data() + offsets_[row], static_cast<std::size_t>(offsets_[row + 1] - offsets_[row])};
  }
  Index row_nnz(Index row) const { return offsets_[row + 1] - offsets_[row]; }

  /// Value at (row, col), zero when not stored. Binary search within the row.
  double at(Index row, Index col) const;
  double row_sum(Index row) const;

  /// Same pattern, new values (one per stored entry).
  SparseMatrix with_values(std::vector<double> values) const;
  SparseMatrix transposed() const;
  DenseMatrix to_dense() const;

  bool same_pattern(const SparseMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && offsets_ == other.offsets_ &&
           cols_idx_ == other.cols_idx_;
  }
  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> offsets_{0};
  std::vector<Index> cols_idx_;
  std::vector<double> values_;
};

/// s * d
DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d);
/// s^T * d, without materializing the transpose.
DenseMatrix spmm_transposed(const SparseMatrix& s, const DenseMatrix& d);
/// s * v
std::vector<double> spmv(const SparseMatrix& s, std::span<const double> v);

}  // namespace hes
