#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hes/graph.hpp"
#include "hes/plan.hpp"
#include "hes/proxy.hpp"

namespace hes {

/// scores(i, k-1) = estimated k-hop homophily of node i.
///
/// With W_S = D^-1 (S .* A) and W_A = D^-1 A (no self-loops),
///   score_i(k) = offdiag_rowsum(W_S^k)_i / offdiag_rowsum(W_A^k)_i,
/// the random-walk-weighted mean over non-returning k-step walks of the
/// product of edge strengths along the walk. Values lie in [0, 1].
struct HopScores {
  DenseMatrix scores;
  /// Row-major N x K; 1 where the denominator vanished and the score was set
  /// to zero.
  std::vector<std::uint8_t> zero_denominator;
  bool exact = true;

  Index num_nodes() const { return scores.rows(); }
  Index hops() const { return scores.cols(); }
  bool flagged(Index node, Index hop) const { return zero_denominator[node * hops() + hop - 1] != 0; }
};

/// N <= exact_threshold: exact diagonal exclusion at every hop (column-blocked
/// sparse powers). Above it: vector recurrences s_k = W s_{k-1} with the
/// diagonal removed only for k <= 2.
HopScores hop_scores(const HomophilyMask& mask, const Graph& graph, Index max_hops, Index exact_threshold = 5000);

enum class StopRule { contiguous_ratio, literal_alg1 };
std::string to_string(StopRule rule);
StopRule parse_stop_rule(const std::string& text);

/// contiguous_ratio: R_i = largest k <= L with score(j) >= rho * score(1)
///   for all j <= k (at least 1).
/// literal_alg1: node aggregates at layer l iff score(l) <= rho * score(1);
///   layer 1 always aggregates.
/// Nodes with score(1) == 0 are flagged and get R_i = 1 (R_i = L when
/// rho == 0 under contiguous_ratio, where the threshold never binds).
ReceptiveFieldPlan assign_receptive_fields(const HopScores& scores, double rho, Index layers,
                                           StopRule rule = StopRule::contiguous_ratio);

/// Label-oracle plan: R_i = largest contiguous k <= L with true k-hop
/// homophily >= epsilon (or <= epsilon with `literal_direction`), at least 1.
/// Isolated nodes get R_i = L.
ReceptiveFieldPlan oracle_receptive_fields(const Graph& graph, double epsilon, Index layers,
                                           bool literal_direction = false);

/// The threshold grid searched by rho sweeps.
inline const std::vector<double>& default_rho_grid() {
  static const std::vector<double> grid{1e-2, 1e-4, 1e-6, 1e-8, 1e-16};
  return grid;
}

/// JSON array of {"node", "stop_depth"}.
void write_plan_json(const ReceptiveFieldPlan& plan, const std::filesystem::path& file);
/// "node\tscore_1\t...\tscore_K".
void write_scores_tsv(const HopScores& scores, const std::filesystem::path& file);

}  // namespace hes
