#include "hes/sparse.hpp"

#include <algorithm>
#include <string>

namespace hes {

SparseMatrix::SparseMatrix(Index rows, Index cols, std::vector<Index> row_offsets,
                           std::vector<Index> col_indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      offsets_(std::move(row_offsets)),
      cols_idx_(std::move(col_indices)),
      values_(std::move(values)) {
  if (rows < 0 || cols < 0) throw ShapeError("negative sparse dimensions");
  if (static_cast<Index>(offsets_.size()) != rows + 1 || offsets_.front() != 0)
    throw ShapeError("row offsets must have rows+1 entries starting at 0");
  if (cols_idx_.size() != values_.size() || offsets_.back() != static_cast<Index>(values_.size()))
    throw ShapeError("column index / value arrays disagree with row offsets");
  for (Index r = 0; r < rows; ++r) {
    if (offsets_[r + 1] < offsets_[r]) throw ShapeError("row offsets not monotone");
    for (Index k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      if (cols_idx_[k] < 0 || cols_idx_[k] >= cols)
        throw ShapeError("column index out of range in row " + std::to_string(r));
      if (k > offsets_[r] && cols_idx_[k] <= cols_idx_[k - 1])
        throw ShapeError("column indices not sorted/unique in row " + std::to_string(r));
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(Index rows, Index cols, std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Index> offsets(static_cast<std::size_t>(rows) + 1, 0);
  std::vector<Index> col_idx;
  std::vector<double> values;
  col_idx.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
      throw ShapeError("triplet index out of range");
    if (!col_idx.empty() && k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
      values.back() += t.value;
      continue;
    }
    col_idx.push_back(t.col);
    values.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (Index r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];
  return SparseMatrix(rows, cols, std::move(offsets), std::move(col_idx), std::move(values));
}

SparseMatrix SparseMatrix::identity(Index n) {
  std::vector<Index> offsets(static_cast<std::size_t>(n) + 1);
  std::vector<Index> cols(static_cast<std::size_t>(n));
  for (Index i = 0; i <= n; ++i) offsets[i] = i;
  for (Index i = 0; i < n; ++i) cols[i] = i;
  return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::vector<double>(n, 1.0));
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
  std::vector<Index> offsets(static_cast<std::size_t>(dense.rows()) + 1, 0);
  std::vector<Index> cols;
  std::vector<double> values;
  for (Index r = 0; r < dense.rows(); ++r) {
    for (Index c = 0; c < dense.cols(); ++c) {
      const double v = dense(r, c);
      if (v != 0.0) {
        cols.push_back(c);
        values.push_back(v);
      }
    }
    offsets[r + 1] = static_cast<Index>(values.size());
  }
  return SparseMatrix(dense.rows(), dense.cols(), std::move(offsets), std::move(cols), std::move(values));
}

double SparseMatrix::at(Index row, Index col) const {
  const auto cols = row_cols(row);
  const auto it = std::lower_bound(cols.begin(), cols.end(), col);
  if (it == cols.end() || *it != col) return 0.0;
  return values_[offsets_[row] + (it - cols.begin())];
}

double SparseMatrix::row_sum(Index row) const {
  double s = 0.0;
  for (double v : row_values(row)) s += v;
  return s;
}

SparseMatrix SparseMatrix::with_values(std::vector<double> values) const {
  if (values.size() != values_.size()) throw ShapeError("with_values: value count mismatch");
  SparseMatrix out = *this;
  out.values_ = std::move(values);
  return out;
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<Index> offsets(static_cast<std::size_t>(cols_) + 1, 0);
  for (Index c : cols_idx_) ++offsets[c + 1];
  for (Index c = 0; c < cols_; ++c) offsets[c + 1] += offsets[c];
  std::vector<Index> next(offsets.begin(), offsets.end() - 1);
  std::vector<Index> col_idx(cols_idx_.size());
  std::vector<double> values(values_.size());
  // Rows are visited in ascending order, so each transposed row ends up sorted.
  for (Index r = 0; r < rows_; ++r) {
    for (Index k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      const Index dst = next[cols_idx_[k]]++;
      col_idx[dst] = r;
      values[dst] = values_[k];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(offsets), std::move(col_idx), std::move(values));
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix out = DenseMatrix::Zero(rows_, cols_);
  for (Index r = 0; r < rows_; ++r)
    for (Index k = offsets_[r]; k < offsets_[r + 1]; ++k) out(r, cols_idx_[k]) = values_[k];
  return out;
}

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.cols() != d.rows())
    throw ShapeError("spmm: " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) + " times " +
                     std::to_string(d.rows()) + "x" + std::to_string(d.cols()));
  DenseMatrix out = DenseMatrix::Zero(s.rows(), d.cols());
  const auto& offsets = s.row_offsets();
  const auto& cols = s.col_indices();
  const auto& vals = s.values();
  for (Index r = 0; r < s.rows(); ++r) {
    auto out_row = out.row(r);
    for (Index k = offsets[r]; k < offsets[r + 1]; ++k) out_row.noalias() += vals[k] * d.row(cols[k]);
  }
  return out;
}

DenseMatrix spmm_transposed(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.rows() != d.rows()) throw ShapeError("spmm_transposed: inner dimension mismatch");
  DenseMatrix out = DenseMatrix::Zero(s.cols(), d.cols());
  const auto& offsets = s.row_offsets();
  const auto& cols = s.col_indices();
  const auto& vals = s.values();
  for (Index r = 0; r < s.rows(); ++r) {
    const auto in_row = d.row(r);
    for (Index k = offsets[r]; k < offsets[r + 1]; ++k) out.row(cols[k]).noalias() += vals[k] * in_row;
  }
  return out;
}

std::vector<double> spmv(const SparseMatrix& s, std::span<const double> v) {
  if (static_cast<Index>(v.size()) != s.cols()) throw ShapeError("spmv: dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(s.rows()), 0.0);
  const auto& offsets = s.row_offsets();
  const auto& cols = s.col_indices();
  const auto& vals = s.values();
  for (Index r = 0; r < s.rows(); ++r) {
    double acc = 0.0;
    for (Index k = offsets[r]; k < offsets[r + 1]; ++k) acc += vals[k] * v[cols[k]];
    out[r] = acc;
  }
  return out;
}

}  // namespace hes
