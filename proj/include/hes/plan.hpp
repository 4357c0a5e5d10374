#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hes/types.hpp"

namespace hes {

/// Per-node receptive field: node i aggregates from neighbors at layers
/// 1..stop_depth[i] and only self-updates afterwards.
///
/// Rules that do not yield a contiguous prefix (the literal Algorithm-style
/// comparison) carry explicit per-layer masks; stop_depth then records the
/// length of the leading run of active layers.
struct ReceptiveFieldPlan {
  Index layers = 0;
  std::vector<Index> stop_depth;
  /// layers x N, 1 = aggregate. Empty unless the rule is non-contiguous.
  std::vector<std::vector<std::uint8_t>> explicit_masks;
  /// Nodes whose depth came from a degenerate score (zero 1-hop score).
  std::vector<std::uint8_t> flagged;
  std::string rule;
  double threshold = 0.0;

  Index num_nodes() const { return static_cast<Index>(stop_depth.size()); }
  bool is_full() const;
  void validate() const;

  /// Every node aggregates at every layer.
  static ReceptiveFieldPlan full(Index num_nodes, Index layers);
};

/// masks[l-1][i] == 1 iff node i aggregates at layer l.
std::vector<std::vector<std::uint8_t>> layer_aggregation_masks(const ReceptiveFieldPlan& plan, Index layers);

struct PlanSummary {
  std::vector<Index> depth_histogram;  // index d-1 counts nodes with R_i = d
  double mean_depth = 0.0;
  Index early_stopped = 0;  // R_i < L
  Index flagged = 0;
};
PlanSummary summarize(const ReceptiveFieldPlan& plan);

}  // namespace hes
