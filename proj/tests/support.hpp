#pragma once

#include <set>
#include <vector>

#include "hes/graph.hpp"
#include "hes/rng.hpp"

namespace testing_support {

using hes::Edge;
using hes::Graph;
using hes::Index;

inline std::vector<Edge> random_edges(hes::Rng& rng, Index n, double density) {
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.bernoulli(density)) edges.emplace_back(i, j);
  return edges;
}

inline Graph random_graph(hes::Rng& rng, Index n, int classes, double density, Index feature_dim = 3) {
  const auto edges = random_edges(rng, n, density);
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.below(classes));
  hes::DenseMatrix x(n, feature_dim);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < feature_dim; ++j) x(i, j) = rng.normal();
  return Graph(n, classes, edges, std::move(x), std::move(labels));
}

inline Graph make_graph(Index n, std::vector<Edge> edges, std::vector<int> labels, int classes = 0) {
  int c = classes;
  for (int l : labels) c = std::max(c, l + 1);
  return Graph(n, c, edges, hes::DenseMatrix::Ones(n, 1), std::move(labels));
}

inline Graph path_graph(std::vector<int> labels) {
  std::vector<Edge> edges;
  const Index n = static_cast<Index>(labels.size());
  for (Index i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return make_graph(n, edges, std::move(labels));
}

/// Adjacency list built straight from the edge input, bypassing CSR.
inline std::vector<std::set<Index>> adjacency_sets(Index n, const std::vector<Edge>& edges) {
  std::vector<std::set<Index>> adj(n);
  for (auto [a, b] : edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  return adj;
}

}  // namespace testing_support
