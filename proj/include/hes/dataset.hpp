#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "hes/graph.hpp"

namespace hes {

/// Load failure, carrying the offending file and (when known) 1-based line.
class BundleError : public std::runtime_error {
 public:
  BundleError(const std::filesystem::path& file, std::size_t line, const std::string& what);
  const std::filesystem::path& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::filesystem::path file_;
  std::size_t line_;
};

struct BundleStats {
  std::string name;
  Index num_nodes = 0;
  Index num_edges = 0;  // undirected
  Index num_classes = 0;
  Index feature_dim = 0;
  Index isolated_nodes = 0;
  double graph_homophily = 0.0;  // NaN when undefined
};

struct LoadedBundle {
  Graph graph;
  BundleStats stats;
};

/// Reads a bundle directory:
///   meta.json     {"name", "num_nodes", "num_classes", "feature_dim"}
///   edges.tsv     "src\tdst" per undirected edge, each pair once
///   features.tsv  feature_dim tab-separated reals per node, node order
///   labels.tsv    "node\tlabel"
///   splits.json   {"train": [...], "val": [...], "test": [...]}
LoadedBundle load_bundle(const std::filesystem::path& dir);

/// Writes the same layout; features use shortest round-trip decimal text.
void write_bundle(const Graph& graph, const std::string& name, const std::filesystem::path& dir);

BundleStats compute_stats(const Graph& graph, const std::string& name);

struct SbmSpec {
  Index clusters = 2;
  Index cluster_size = 50;
  double p = 0.5;  // intra-cluster
  double q = 0.1;  // inter-cluster
  std::uint64_t seed = 0;
  /// Allows q > p (heterophilic SBMs); rejected otherwise.
  bool allow_q_above_p = false;

  /// Synthetic node features: feature_dim columns, class-mean shift of
  /// `feature_signal` on column (label % feature_dim) plus unit Gaussian
  /// noise. feature_dim == 0 gives one constant column.
  Index feature_dim = 0;
  double feature_signal = 1.0;

  void validate() const;
};

/// Independent Bernoulli edges per unordered pair (p within a cluster, q
/// across), labels = cluster ids, 48/32/20 stratified splits from the same
/// seed. Deterministic given the SbmSpec.
Graph generate_sbm(const SbmSpec& spec);

using SplitFractions = std::array<double, 3>;

/// Stratified-by-label random partition. Global sizes are
/// round(train*N), round(val*N) and the remainder. Falls back to an
/// unstratified shuffle (with a warning on stderr) when any class has fewer
/// than 3 nodes.
Splits make_splits(const Graph& graph, SplitFractions fractions, std::uint64_t seed);

}  // namespace hes
