#include "hes/graph.hpp"

#include <algorithm>
#include <deque>
#include <string>
#include <unordered_set>

namespace hes {

Graph::Graph(Index num_nodes, Index num_classes, std::span<const Edge> edges, DenseMatrix features,
             std::vector<int> labels, Splits splits)
    : num_nodes_(num_nodes),
      num_classes_(num_classes),
      features_(std::move(features)),
      labels_(std::move(labels)),
      splits_(std::move(splits)) {
  if (num_nodes < 0) throw std::invalid_argument("negative node count");
  if (num_classes < 1) throw std::invalid_argument("graph needs at least one class");
  if (static_cast<Index>(labels_.size()) != num_nodes)
    throw std::invalid_argument("label count " + std::to_string(labels_.size()) + " != node count " +
                                std::to_string(num_nodes));
  if (features_.rows() != num_nodes)
    throw std::invalid_argument("feature rows " + std::to_string(features_.rows()) + " != node count " +
                                std::to_string(num_nodes));
  for (Index i = 0; i < num_nodes; ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes)
      throw std::invalid_argument("label of node " + std::to_string(i) + " out of range");
  }

  std::vector<Triplet> triplets;
  triplets.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw std::invalid_argument("edge (" + std::to_string(u) + "," + std::to_string(v) + ") out of range");
    if (u == v) throw std::invalid_argument("self-loop at node " + std::to_string(u));
    triplets.push_back({u, v, 1.0});
    triplets.push_back({v, u, 1.0});
  }
  adjacency_ = SparseMatrix::from_triplets(num_nodes, num_nodes, std::move(triplets));
  for (double v : adjacency_.values()) {
    if (v != 1.0) throw std::invalid_argument("duplicate edge in edge list");
  }
  validate_splits();
}

void Graph::validate_splits() const {
  std::vector<char> seen(static_cast<std::size_t>(num_nodes_), 0);
  for (const auto* part : {&splits_.train, &splits_.val, &splits_.test}) {
    for (NodeId n : *part) {
      if (n < 0 || n >= num_nodes_) throw std::invalid_argument("split node " + std::to_string(n) + " out of range");
      if (seen[n]) throw std::invalid_argument("node " + std::to_string(n) + " appears in more than one split slot");
      seen[n] = 1;
    }
  }
}

Index Graph::isolated_count() const {
  Index count = 0;
  for (Index i = 0; i < num_nodes_; ++i) count += degree(i) == 0;
  return count;
}

std::vector<Edge> Graph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(num_edges()));
  for (Index i = 0; i < num_nodes_; ++i)
    for (Index j : neighbors(i))
      if (i < j) out.emplace_back(i, j);
  return out;
}

Graph Graph::with_splits(Splits splits) const {
  Graph g = *this;
  g.splits_ = std::move(splits);
  g.validate_splits();
  return g;
}

void Graph::check_node(NodeId node) const {
  if (node < 0 || node >= num_nodes_) throw std::invalid_argument("invalid node id " + std::to_string(node));
}

std::vector<Index> bfs_distances(const Graph& graph, NodeId node, Index max_depth) {
  graph.check_node(node);
  std::vector<Index> dist(static_cast<std::size_t>(graph.num_nodes()), -1);
  std::deque<NodeId> frontier{node};
  dist[node] = 0;
  while (!frontier.empty()) {
    const NodeId u = frontier.front();
    frontier.pop_front();
    if (dist[u] == max_depth) continue;
    for (Index v : graph.neighbors(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        frontier.push_back(v);
      }
    }
  }
  return dist;
}

HopNeighborhood khop_neighborhood(const Graph& graph, NodeId node, Index k) {
  if (k < 1) throw std::invalid_argument("k-hop neighborhood needs k >= 1");
  const auto dist = bfs_distances(graph, node, k);
  HopNeighborhood out{node, k, {}};
  for (Index v = 0; v < graph.num_nodes(); ++v)
    if (dist[v] >= 1) out.members.push_back(v);
  return out;
}

double node_homophily(const Graph& graph, NodeId node) {
  graph.check_node(node);
  const auto nbrs = graph.neighbors(node);
  if (nbrs.empty()) throw UndefinedHomophily("node " + std::to_string(node) + " has no neighbors");
  Index same = 0;
  for (Index v : nbrs) same += graph.label(v) == graph.label(node);
  return static_cast<double>(same) / static_cast<double>(nbrs.size());
}

double graph_homophily(const Graph& graph) {
  double total = 0.0;
  Index counted = 0;
  for (Index i = 0; i < graph.num_nodes(); ++i) {
    if (graph.degree(i) == 0) continue;
    total += node_homophily(graph, i);
    ++counted;
  }
  if (counted == 0) throw UndefinedHomophily("graph homophily undefined: every node is isolated");
  return total / static_cast<double>(counted);
}

double khop_homophily(const Graph& graph, NodeId node, Index k) {
  const auto hood = khop_neighborhood(graph, node, k);
  if (hood.members.empty())
    throw UndefinedHomophily("node " + std::to_string(node) + " has an empty " + std::to_string(k) + "-hop neighborhood");
  Index same = 0;
  for (NodeId v : hood.members) same += graph.label(v) == graph.label(node);
  return static_cast<double>(same) / static_cast<double>(hood.members.size());
}

double edge_homophily(const Graph& graph) {
  if (graph.num_edges() == 0) throw UndefinedHomophily("edge homophily undefined on an edgeless graph");
  Index same = 0;
  for (const auto& [u, v] : graph.edge_list()) same += graph.label(u) == graph.label(v);
  return static_cast<double>(same) / static_cast<double>(graph.num_edges());
}

}  // namespace hes
