#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hes {

using Index = std::ptrdiff_t;
using NodeId = Index;

/// Row-major dense matrix of 64-bit floats. Holds features, embeddings and
/// layer weights.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a homophily ratio is requested for a node whose neighborhood
/// is empty.
class UndefinedHomophily : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// NaN or infinity appeared in a loss or gradient.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hes
