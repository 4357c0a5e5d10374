#include <doctest.h>

#include "hes/rng.hpp"
#include "hes/sparse.hpp"

using namespace hes;

namespace {

SparseMatrix random_sparse(Rng& rng, Index rows, Index cols, double density) {
  std::vector<Triplet> t;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (rng.bernoulli(density)) t.push_back({i, j, rng.normal()});
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

DenseMatrix random_dense(Rng& rng, Index rows, Index cols) {
  DenseMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("from_triplets sums duplicates and sorts columns") {
  auto m = SparseMatrix::from_triplets(2, 3, {{0, 2, 1.0}, {0, 0, 2.0}, {0, 2, 0.5}, {1, 1, 4.0}});
  CHECK(m.nnz() == 3);
  CHECK(m.at(0, 2) == 1.5);
  CHECK(m.at(0, 0) == 2.0);
  CHECK(m.at(1, 1) == 4.0);
  CHECK(m.at(1, 0) == 0.0);
  CHECK(m.row_cols(0)[0] == 0);
  CHECK(m.row_sum(0) == 3.5);
}

TEST_CASE("constructor rejects malformed CSR") {
  CHECK_THROWS(SparseMatrix(2, 2, {0, 1}, {0}, {1.0}));            // offsets too short
  CHECK_THROWS(SparseMatrix(1, 2, {0, 2}, {1, 0}, {1.0, 1.0}));    // unsorted
  CHECK_THROWS(SparseMatrix(1, 2, {0, 1}, {2}, {1.0}));            // column out of range
  CHECK_THROWS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}));
}

TEST_CASE("dense round trip, transpose and products agree with Eigen") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Index r = 1 + static_cast<Index>(rng.below(12)), c = 1 + static_cast<Index>(rng.below(12));
    const auto s = random_sparse(rng, r, c, 0.3);
    const DenseMatrix d = s.to_dense();
    CHECK(SparseMatrix::from_dense(d) == s);
    CHECK(s.transposed().to_dense() == d.transpose());
    const auto x = random_dense(rng, c, 3);
    CHECK((spmm(s, x) - d * x).cwiseAbs().maxCoeff() < 1e-12);
    const auto y = random_dense(rng, r, 2);
    CHECK((spmm_transposed(s, y) - d.transpose() * y).cwiseAbs().maxCoeff() < 1e-12);
    std::vector<double> v(c);
    for (auto& e : v) e = rng.normal();
    const auto sv = spmv(s, v);
    for (Index i = 0; i < r; ++i) {
      double ref = 0;
      for (Index j = 0; j < c; ++j) ref += d(i, j) * v[j];
      CHECK(std::abs(sv[i] - ref) < 1e-12);
    }
  }
}

TEST_CASE("identity and with_values") {
  const auto id = SparseMatrix::identity(4);
  CHECK(id.to_dense() == DenseMatrix::Identity(4, 4));
  const auto twice = id.with_values({2, 2, 2, 2});
  CHECK(twice.same_pattern(id));
  CHECK(twice.at(3, 3) == 2.0);
  CHECK_THROWS(id.with_values({1.0}));
}

TEST_CASE("shape mismatches throw") {
  const auto id = SparseMatrix::identity(3);
  CHECK_THROWS_AS(spmm(id, DenseMatrix::Zero(2, 2)), ShapeError);
  CHECK_THROWS_AS(spmm_transposed(id, DenseMatrix::Zero(2, 2)), ShapeError);
  std::vector<double> v(2);
  CHECK_THROWS_AS(spmv(id, v), ShapeError);
}
