#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hes/graph.hpp"
#include "hes/rng.hpp"
#include "hes/sparse.hpp"
#include "hes/types.hpp"

namespace hes {

enum class NormMode { row, symmetric };

/// row:       D^-1 (A + loops*I)
/// symmetric: D^-1/2 (A + loops*I) D^-1/2
/// Degrees are taken after loop insertion; zero-degree rows stay all-zero.
SparseMatrix normalized_adjacency(const Graph& graph, NormMode mode, bool self_loops);

// --- layers -----------------------------------------------------------------

/// y = x W + 1 b
DenseMatrix linear_forward(const DenseMatrix& x, const DenseMatrix& weight, const RowVector& bias);

struct LinearGrads {
  DenseMatrix input;
  DenseMatrix weight;
  RowVector bias;
};
LinearGrads linear_backward(const DenseMatrix& x, const DenseMatrix& weight, const DenseMatrix& grad_out);

DenseMatrix relu_forward(const DenseMatrix& x);
/// Gradient through relu, given the relu input.
DenseMatrix relu_backward(const DenseMatrix& pre_activation, const DenseMatrix& grad_out);

/// Inverted dropout. `keep_scale` entries are 0 or 1/(1-p).
struct DropoutMask {
  DenseMatrix keep_scale;
};
/// p == 0 returns an empty mask and the input unchanged.
DenseMatrix dropout_forward(const DenseMatrix& x, double p, Rng& rng, DropoutMask& mask);
DenseMatrix dropout_backward(const DropoutMask& mask, const DenseMatrix& grad_out);

/// Row-wise softmax, max-shifted.
DenseMatrix softmax_rows(const DenseMatrix& logits);

struct LossAndGrad {
  double loss = 0.0;
  DenseMatrix grad;  // d loss / d logits; zero rows outside the mask
};
/// Mean cross-entropy over `nodes`. Throws on an empty node set or a label
/// out of range.
LossAndGrad softmax_cross_entropy(const DenseMatrix& logits, std::span<const int> labels,
                                  std::span<const NodeId> nodes);

/// Accuracy of argmax predictions (ties go to the lowest class index).
double accuracy(const DenseMatrix& logits, std::span<const int> labels, std::span<const NodeId> nodes);
int argmax_row(const DenseMatrix& logits, Index row);

// --- optimization -------------------------------------------------------------

struct Parameter {
  DenseMatrix value;
  DenseMatrix grad;
  double weight_decay = 0.0;  // coupled L2: grad += wd * value before the step
};

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are created lazily on the first step
/// and must keep matching parameter shapes.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  /// Throws DivergenceError if any gradient is non-finite.
  void step(std::span<Parameter> params);

  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<DenseMatrix> m_;
  std::vector<DenseMatrix> v_;
};

/// Plain gradient descent, same decay convention as AdamState.
void sgd_step(std::span<Parameter> params, double lr);

/// Glorot-uniform initialization.
DenseMatrix glorot_uniform(Index fan_in, Index fan_out, Rng& rng);

bool all_finite(const DenseMatrix& m);

}  // namespace hes
