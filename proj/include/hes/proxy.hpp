#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "hes/graph.hpp"
#include "hes/models.hpp"

namespace hes {

enum class ProxyArch { mlp3, gcn4, sgc3 };

std::string to_string(ProxyArch arch);
ProxyArch parse_proxy_arch(const std::string& text);
ModelSpec proxy_model_spec(ProxyArch arch, Index hidden = 64, double dropout = 0.5);

struct ProxyConfig {
  ProxyArch arch = ProxyArch::mlp3;
  Index hidden = 64;
  double dropout = 0.5;
  TrainHyper hyper{};
};

/// Per-node predicted class distribution. Rows lie on the simplex.
struct PseudoLabels {
  DenseMatrix probs;

  Index num_nodes() const { return probs.rows(); }
  Index num_classes() const { return probs.cols(); }
  /// Throws std::invalid_argument unless every row is nonnegative and sums
  /// to 1 within `tol`.
  void validate(double tol = 1e-9) const;
};

/// Edge-restricted homophily strengths: same pattern as the adjacency,
/// value S_ij = <z_i, z_j>.
struct HomophilyMask {
  SparseMatrix mask;

  /// Mean of S over undirected edges.
  double mean_strength() const;
};

/// Wraps a proxy model so it can be trained once and fine-tuned later.
class ProxyTrainer {
 public:
  ProxyTrainer(const Graph& graph, ProxyConfig config, std::uint64_t seed);

  /// Full training with early stopping; keeps the best-validation snapshot.
  const TrainResult& fit();
  /// Continues Adam on the training loss for `epochs` steps at `lr`.
  void finetune(Index epochs, double lr);
  PseudoLabels pseudo_labels() const;
  const TrainedModel& model() const { return model_; }

 private:
  const Graph& graph_;
  ProxyConfig config_;
  std::uint64_t seed_;
  TrainedModel model_;
  std::optional<AdamState> adam_;
  std::optional<Rng> dropout_rng_;
  TrainResult fit_result_;
};

/// Trains the proxy on the training split and returns softmax outputs on all
/// nodes from the best-validation-loss snapshot.
PseudoLabels train_proxy(const Graph& graph, const ProxyConfig& config, std::uint64_t seed);

/// sum_mu z_i[mu] * z_j[mu] (trace of the outer product). Both inputs must be
/// on the simplex within 1e-9.
double homophily_strength(std::span<const double> zi, std::span<const double> zj);

/// S on the adjacency pattern only; each unordered pair computed once and
/// mirrored so S_ij == S_ji bitwise.
HomophilyMask build_mask(const Graph& graph, const PseudoLabels& pseudo);

/// "src\tdst\tstrength" per undirected edge (src < dst).
void write_mask_tsv(const HomophilyMask& mask, const std::filesystem::path& file);

struct RefreshConfig {
  /// Refresh every `period` GNN epochs; 0 disables (two-phase mode).
  Index period = 0;
  Index finetune_epochs = 10;
  double lr = 0.01;
};

/// At GNN epoch `epoch` (0-based), fine-tunes the proxy and rebuilds the
/// mask when the period elapses; otherwise returns nothing.
std::optional<HomophilyMask> refresh_cycle(const Graph& graph, ProxyTrainer& proxy, Index epoch,
                                           const RefreshConfig& config);

}  // namespace hes
