#include "hes/nn.hpp"

#include <cmath>
#include <string>

namespace hes {

SparseMatrix normalized_adjacency(const Graph& graph, NormMode mode, bool self_loops) {
  const Index n = graph.num_nodes();
  const SparseMatrix& a = graph.adjacency();
  std::vector<Index> offsets(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> cols;
  std::vector<double> values;
  cols.reserve(static_cast<std::size_t>(a.nnz() + (self_loops ? n : 0)));
  values.reserve(cols.capacity());

  std::vector<double> degree(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) degree[i] = static_cast<double>(graph.degree(i)) + (self_loops ? 1.0 : 0.0);
  auto scale = [&](Index i, Index j) {
    if (mode == NormMode::row) return 1.0 / degree[i];
    return 1.0 / (std::sqrt(degree[i]) * std::sqrt(degree[j]));
  };

  for (Index i = 0; i < n; ++i) {
    bool loop_done = !self_loops;
    for (Index j : a.row_cols(i)) {
      if (!loop_done && j > i) {
        cols.push_back(i);
        values.push_back(scale(i, i));
        loop_done = true;
      }
      cols.push_back(j);
      values.push_back(scale(i, j));
    }
    if (!loop_done) {
      cols.push_back(i);
      values.push_back(scale(i, i));
    }
    offsets[i + 1] = static_cast<Index>(cols.size());
  }
  return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::move(values));
}

DenseMatrix linear_forward(const DenseMatrix& x, const DenseMatrix& weight, const RowVector& bias) {
  if (x.cols() != weight.rows() || (bias.size() != 0 && bias.size() != weight.cols()))
    throw ShapeError("linear_forward: shape mismatch");
  DenseMatrix y = x * weight;
  if (bias.size() != 0) y.rowwise() += bias;
  return y;
}

LinearGrads linear_backward(const DenseMatrix& x, const DenseMatrix& weight, const DenseMatrix& grad_out) {
  if (x.rows() != grad_out.rows() || x.cols() != weight.rows() || weight.cols() != grad_out.cols())
    throw ShapeError("linear_backward: shape mismatch");
  LinearGrads g;
  g.input = grad_out * weight.transpose();
  g.weight = x.transpose() * grad_out;
  g.bias = grad_out.colwise().sum();
  return g;
}

DenseMatrix relu_forward(const DenseMatrix& x) { return x.cwiseMax(0.0); }

DenseMatrix relu_backward(const DenseMatrix& pre_activation, const DenseMatrix& grad_out) {
  if (pre_activation.rows() != grad_out.rows() || pre_activation.cols() != grad_out.cols())
    throw ShapeError("relu_backward: shape mismatch");
  return (pre_activation.array() > 0.0).select(grad_out, 0.0);
}

DenseMatrix dropout_forward(const DenseMatrix& x, double p, Rng& rng, DropoutMask& mask) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (p == 0.0) {
    mask.keep_scale.resize(0, 0);
    return x;
  }
  const double scale = 1.0 / (1.0 - p);
  mask.keep_scale.resize(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) mask.keep_scale(i, j) = rng.uniform() < p ? 0.0 : scale;
  return x.cwiseProduct(mask.keep_scale);
}

DenseMatrix dropout_backward(const DropoutMask& mask, const DenseMatrix& grad_out) {
  if (mask.keep_scale.size() == 0) return grad_out;
  if (mask.keep_scale.rows() != grad_out.rows() || mask.keep_scale.cols() != grad_out.cols())
    throw ShapeError("dropout_backward: shape mismatch");
  return grad_out.cwiseProduct(mask.keep_scale);
}

DenseMatrix softmax_rows(const DenseMatrix& logits) {
  DenseMatrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double total = 0.0;
    for (Index j = 0; j < logits.cols(); ++j) {
      out(i, j) = std::exp(logits(i, j) - mx);
      total += out(i, j);
    }
    out.row(i) /= total;
  }
  return out;
}

LossAndGrad softmax_cross_entropy(const DenseMatrix& logits, std::span<const int> labels,
                                  std::span<const NodeId> nodes) {
  if (nodes.empty()) throw std::invalid_argument("cross-entropy over an empty node set");
  if (static_cast<Index>(labels.size()) != logits.rows()) throw ShapeError("cross-entropy: label count mismatch");
  const Index c = logits.cols();
  LossAndGrad out;
  out.grad = DenseMatrix::Zero(logits.rows(), c);
  const double inv = 1.0 / static_cast<double>(nodes.size());
  for (NodeId i : nodes) {
    const int y = labels[i];
    if (y < 0 || y >= c) throw std::invalid_argument("label out of range: " + std::to_string(y));
    const double mx = logits.row(i).maxCoeff();
    double total = 0.0;
    for (Index j = 0; j < c; ++j) total += std::exp(logits(i, j) - mx);
    const double log_z = mx + std::log(total);
    out.loss += (log_z - logits(i, y)) * inv;
    for (Index j = 0; j < c; ++j) out.grad(i, j) = std::exp(logits(i, j) - log_z) * inv;
    out.grad(i, y) -= inv;
  }
  return out;
}

int argmax_row(const DenseMatrix& logits, Index row) {
  int best = 0;
  for (Index j = 1; j < logits.cols(); ++j)
    if (logits(row, j) > logits(row, best)) best = static_cast<int>(j);
  return best;
}

double accuracy(const DenseMatrix& logits, std::span<const int> labels, std::span<const NodeId> nodes) {
  if (nodes.empty()) throw std::invalid_argument("accuracy over an empty node set");
  Index correct = 0;
  for (NodeId i : nodes) correct += argmax_row(logits, i) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

bool all_finite(const DenseMatrix& m) { return m.allFinite(); }

void AdamState::step(std::span<Parameter> params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(DenseMatrix::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(DenseMatrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter count changed between steps");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() || m_[k].rows() != p.value.rows() ||
        m_[k].cols() != p.value.cols())
      throw ShapeError("adam: shape mismatch for parameter " + std::to_string(k));
    if (!p.grad.allFinite()) throw DivergenceError("adam: non-finite gradient in parameter " + std::to_string(k));
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    DenseMatrix g = p.grad;
    if (p.weight_decay != 0.0) g += p.weight_decay * p.value;
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * g;
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    for (Index i = 0; i < p.value.size(); ++i) {
      const double mhat = m_[k].data()[i] / c1;
      const double vhat = v_[k].data()[i] / c2;
      p.value.data()[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void sgd_step(std::span<Parameter> params, double lr) {
  for (auto& p : params) {
    if (!p.grad.allFinite()) throw DivergenceError("sgd: non-finite gradient");
    if (p.weight_decay != 0.0)
      p.value -= lr * (p.grad + p.weight_decay * p.value);
    else
      p.value -= lr * p.grad;
  }
}

DenseMatrix glorot_uniform(Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  DenseMatrix w(fan_in, fan_out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
  return w;
}

}  // namespace hes
