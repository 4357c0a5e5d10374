#pragma once

#include <span>
#include <utility>
#include <vector>

#include "hes/sparse.hpp"
#include "hes/types.hpp"

namespace hes {

struct Splits {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  friend bool operator==(const Splits&, const Splits&) = default;
};

using Edge = std::pair<NodeId, NodeId>;

/// Immutable undirected attributed graph.
///
/// The adjacency is stored once per direction in CSR form with unit values
/// and no self-loops. Construction validates symmetry, index ranges, label
/// ranges and split disjointness; nothing can be changed afterwards.
class Graph {
 public:
  /// `edges` lists each unordered pair once, in either orientation.
  /// Throws std::invalid_argument on self-loops, duplicates, out-of-range
  /// ids/labels, feature row mismatch or overlapping splits.
  Graph(Index num_nodes, Index num_classes, std::span<const Edge> edges, DenseMatrix features,
        std::vector<int> labels, Splits splits = {});

  Index num_nodes() const { return num_nodes_; }
  Index num_classes() const { return num_classes_; }
  /// Undirected edge count.
  Index num_edges() const { return adjacency_.nnz() / 2; }
  Index feature_dim() const { return features_.cols(); }

  const SparseMatrix& adjacency() const { return adjacency_; }
  std::span<const Index> neighbors(NodeId node) const { return adjacency_.row_cols(node); }
  Index degree(NodeId node) const { return adjacency_.row_nnz(node); }
  Index isolated_count() const;

  const DenseMatrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  int label(NodeId node) const { return labels_[node]; }
  const Splits& splits() const { return splits_; }

  /// Edge list with src < dst, sorted.
  std::vector<Edge> edge_list() const;

  /// Copy with replaced splits (validated).
  Graph with_splits(Splits splits) const;

  void check_node(NodeId node) const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.num_classes_ == b.num_classes_ &&
           a.adjacency_ == b.adjacency_ && a.features_ == b.features_ && a.labels_ == b.labels_ &&
           a.splits_ == b.splits_;
  }

 private:
  Graph() = default;
  void validate_splits() const;

  Index num_nodes_ = 0;
  Index num_classes_ = 0;
  SparseMatrix adjacency_;
  DenseMatrix features_;
  std::vector<int> labels_;
  Splits splits_;
};

struct HopNeighborhood {
  NodeId node = 0;
  Index k = 1;
  /// Sorted ids at shortest-path distance in [1, k].
  std::vector<NodeId> members;
};

/// BFS truncated at depth k.
HopNeighborhood khop_neighborhood(const Graph& graph, NodeId node, Index k);

/// Shortest-path distances from `node` up to `max_depth`; -1 beyond or
/// unreachable.
std::vector<Index> bfs_distances(const Graph& graph, NodeId node, Index max_depth);

/// Fraction of 1-hop neighbors sharing the node's label. Throws
/// UndefinedHomophily for isolated nodes.
double node_homophily(const Graph& graph, NodeId node);

/// Mean node homophily over non-isolated nodes. Throws UndefinedHomophily if
/// every node is isolated.
double graph_homophily(const Graph& graph);

/// Fraction of the k-hop neighborhood sharing the node's label.
double khop_homophily(const Graph& graph, NodeId node, Index k);

/// Fraction of undirected edges whose endpoints share a label.
double edge_homophily(const Graph& graph);

inline double node_heterophily(const Graph& graph, NodeId node) { return 1.0 - node_homophily(graph, node); }
inline double graph_heterophily(const Graph& graph) { return 1.0 - graph_homophily(graph); }
inline double khop_heterophily(const Graph& graph, NodeId node, Index k) {
  return 1.0 - khop_homophily(graph, node, k);
}

}  // namespace hes
