#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hes/graph.hpp"
#include "hes/nn.hpp"
#include "hes/plan.hpp"

namespace hes {

enum class Arch { mlp, gcn, sgc };
enum class Activation { relu, identity };

std::string to_string(Arch arch);
Arch parse_arch(const std::string& text);

struct ModelSpec {
  Arch arch = Arch::gcn;
  /// Weight layers for mlp/gcn, propagation hops for sgc.
  Index layers = 2;
  Index hidden = 64;
  double dropout = 0.5;
  Activation activation = Activation::relu;

  void validate() const;
  /// (d_in, d_out) of every weight layer.
  std::vector<std::pair<Index, Index>> layer_dims(Index input_dim, Index num_classes) const;
};

/// Node features as the first layer sees them. Sparse storage is used when
/// the matrix is mostly zeros (bag-of-words inputs).
class FeatureInput {
 public:
  explicit FeatureInput(const DenseMatrix& features, double sparse_density_cutoff = 0.1);
  explicit FeatureInput(SparseMatrix features);

  bool is_sparse() const { return sparse_.has_value(); }
  Index rows() const;
  Index cols() const;
  const DenseMatrix& dense() const { return dense_; }
  const SparseMatrix& sparse() const { return *sparse_; }

 private:
  DenseMatrix dense_;
  std::optional<SparseMatrix> sparse_;
};

/// Per-layer propagation operators. Layer l uses the normalized adjacency
/// rows of nodes that aggregate at l and identity rows for those that have
/// stopped, so a stopped node computes h_i W (self weight 1).
class Propagation {
 public:
  /// Unpruned: every layer shares `base`.
  Propagation(std::shared_ptr<const SparseMatrix> base, Index layers);
  Propagation(std::shared_ptr<const SparseMatrix> base, const ReceptiveFieldPlan& plan);

  Index layers() const { return static_cast<Index>(forward_.size()); }
  const SparseMatrix& forward(Index layer) const { return *forward_[layer]; }
  const SparseMatrix& backward(Index layer) const { return *backward_[layer]; }

 private:
  std::vector<std::shared_ptr<const SparseMatrix>> forward_;
  std::vector<std::shared_ptr<const SparseMatrix>> backward_;
};

/// Rows of `base` for active nodes, e_i for inactive ones.
SparseMatrix masked_propagation(const SparseMatrix& base, std::span<const std::uint8_t> active);

/// Model parameters plus the architecture and plan they were trained with.
struct TrainedModel {
  ModelSpec spec;
  Index input_dim = 0;
  Index num_classes = 0;
  /// Interleaved [W_1, b_1, W_2, b_2, ...]; biases are 1 x d_out.
  std::vector<Parameter> params;
  std::optional<ReceptiveFieldPlan> plan;

  static TrainedModel initialize(const ModelSpec& spec, Index input_dim, Index num_classes, Rng& rng);

  Index weight_layers() const { return static_cast<Index>(params.size() / 2); }
  Parameter& weight(Index layer) { return params[2 * layer]; }
  const Parameter& weight(Index layer) const { return params[2 * layer]; }
  Parameter& bias(Index layer) { return params[2 * layer + 1]; }
  const Parameter& bias(Index layer) const { return params[2 * layer + 1]; }
};

/// Everything backward() needs from one forward pass.
struct ForwardCache {
  std::vector<DenseMatrix> inputs;           // dropout outputs fed to each weight layer
  std::optional<SparseMatrix> sparse_input;  // replaces inputs[0] when the features are sparse
  std::vector<DenseMatrix> pre_activations;
  std::vector<DropoutMask> dropout;
  DenseMatrix logits;
};

/// Stateless forward pass. Dropout is active iff `rng` is non-null.
/// For SGC, `sgc_features` must hold the propagated features (see
/// sgc_propagate); `features` is ignored.
DenseMatrix forward(const TrainedModel& model, const FeatureInput& features, const Propagation& prop,
                    Rng* rng = nullptr, ForwardCache* cache = nullptr, const DenseMatrix* sgc_features = nullptr);

/// Accumulates parameter gradients (overwrites .grad) from d loss/d logits.
void backward(TrainedModel& model, const Propagation& prop, const ForwardCache& cache, const DenseMatrix& grad_logits);

/// P_L ... P_1 X
DenseMatrix sgc_propagate(const FeatureInput& features, const Propagation& prop);

/// Convenience: builds propagation for the model's own plan and runs an
/// evaluation-mode pass over the whole graph.
DenseMatrix predict(const TrainedModel& model, const Graph& graph);

double evaluate(const TrainedModel& model, const Graph& graph, std::span<const NodeId> split);

/// GCN/SGC propagation operator for `graph`: symmetric normalization with
/// self-loops.
std::shared_ptr<const SparseMatrix> gcn_operator(const Graph& graph);
Propagation make_propagation(const Graph& graph, const ModelSpec& spec, const ReceptiveFieldPlan* plan);

struct TrainHyper {
  Index max_epochs = 500;
  Index patience = 100;
  AdamConfig adam{};
  double weight_decay = 5e-4;  // first weight matrix only
};

struct EpochRecord {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct TrainResult {
  TrainedModel model;  // best-validation-loss snapshot
  std::vector<EpochRecord> history;
  Index best_epoch = 0;
  double best_val_loss = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

/// Called after each epoch; a returned plan replaces the current one from
/// the next epoch on.
using PlanHook = std::function<std::optional<ReceptiveFieldPlan>(Index epoch, const TrainedModel& current)>;

/// Full-batch training, cross-entropy on the train split, Adam, early
/// stopping on validation loss. Throws DivergenceError on NaN loss.
TrainResult train(const Graph& graph, const ModelSpec& spec, const ReceptiveFieldPlan* plan, const TrainHyper& hyper,
                  std::uint64_t seed, const PlanHook& hook = {});

struct MacsReport {
  std::vector<double> aggregation;  // per layer (per hop for sgc)
  std::vector<double> transform;    // per weight layer
  double total = 0.0;
  double active_slots = 0.0;
  double total_slots = 0.0;
  double sparsity_percent = 0.0;
};

/// Inference MACs. Aggregation at layer l costs nnz_active(l) * d_in(l):
/// directed edges j->i with node i active at l, plus one self-loop slot per
/// node. Transform costs N * d_in * d_out.
MacsReport count_macs(const ModelSpec& spec, const Graph& graph, const ReceptiveFieldPlan* plan);

/// Directory of layer_<k>_weight.tsv / layer_<k>_bias.tsv plus spec.json.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& dir);
TrainedModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace hes
