#include "hes/receptive_field.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <json.hpp>

namespace hes {

namespace {

// D^-1 (values on the adjacency pattern).
SparseMatrix degree_normalized(const SparseMatrix& pattern_values) {
  std::vector<double> vals = pattern_values.values();
  const auto& offsets = pattern_values.row_offsets();
  for (Index i = 0; i < pattern_values.rows(); ++i) {
    const Index deg = offsets[i + 1] - offsets[i];
    for (Index k = offsets[i]; k < offsets[i + 1]; ++k) vals[k] /= static_cast<double>(deg);
  }
  return pattern_values.with_values(std::move(vals));
}

struct WalkMass {
  // N x K, row-major: full row sums and diagonals of W^k.
  std::vector<double> row_sums;
  std::vector<double> diag;
};

WalkMass walk_mass_exact(const SparseMatrix& w, Index hops) {
  const Index n = w.rows();
  WalkMass out{std::vector<double>(static_cast<std::size_t>(n * hops), 0.0),
               std::vector<double>(static_cast<std::size_t>(n * hops), 0.0)};
  constexpr Index block = 256;
  for (Index c0 = 0; c0 < n; c0 += block) {
    const Index width = std::min(block, n - c0);
    DenseMatrix m = DenseMatrix::Zero(n, width);
    for (Index c = 0; c < width; ++c) m(c0 + c, c) = 1.0;
    for (Index k = 0; k < hops; ++k) {
      m = spmm(w, m);
      for (Index i = 0; i < n; ++i) out.row_sums[i * hops + k] += m.row(i).sum();
      for (Index c = 0; c < width; ++c) out.diag[(c0 + c) * hops + k] = m(c0 + c, c);
    }
  }
  return out;
}

WalkMass walk_mass_recurrence(const SparseMatrix& w, Index hops) {
  const Index n = w.rows();
  WalkMass out{std::vector<double>(static_cast<std::size_t>(n * hops), 0.0),
               std::vector<double>(static_cast<std::size_t>(n * hops), 0.0)};
  std::vector<double> s(static_cast<std::size_t>(n), 1.0);
  for (Index k = 0; k < hops; ++k) {
    s = spmv(w, s);
    for (Index i = 0; i < n; ++i) out.row_sums[i * hops + k] = s[i];
  }
  if (hops >= 2) {
    // diag(W^2)_i = sum_j W_ij W_ji
    for (Index i = 0; i < n; ++i) {
      double d = 0.0;
      const auto cols = w.row_cols(i);
      const auto vals = w.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k) d += vals[k] * w.at(cols[k], i);
      out.diag[i * hops + 1] = d;
    }
  }
  return out;
}

}  // namespace

HopScores hop_scores(const HomophilyMask& mask, const Graph& graph, Index max_hops, Index exact_threshold) {
  if (max_hops < 1) throw std::invalid_argument("hop_scores needs K >= 1");
  if (!mask.mask.same_pattern(graph.adjacency())) throw ShapeError("mask pattern differs from the adjacency");
  const Index n = graph.num_nodes();
  const SparseMatrix ws = degree_normalized(mask.mask);
  const SparseMatrix wa = degree_normalized(graph.adjacency());
  HopScores out;
  out.exact = n <= exact_threshold;
  const WalkMass num = out.exact ? walk_mass_exact(ws, max_hops) : walk_mass_recurrence(ws, max_hops);
  const WalkMass den = out.exact ? walk_mass_exact(wa, max_hops) : walk_mass_recurrence(wa, max_hops);

  out.scores = DenseMatrix::Zero(n, max_hops);
  out.zero_denominator.assign(static_cast<std::size_t>(n * max_hops), 0);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < max_hops; ++k) {
      const Index idx = i * max_hops + k;
      const double d = den.row_sums[idx] - den.diag[idx];
      // Return-only walk mass cancels to rounding noise, not exactly zero.
      if (!(d > 1e-12 * den.row_sums[idx])) {
        out.zero_denominator[idx] = 1;
        continue;
      }
      const double v = (num.row_sums[idx] - num.diag[idx]) / d;
      out.scores(i, k) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

std::string to_string(StopRule rule) {
  return rule == StopRule::contiguous_ratio ? "contiguous-ratio" : "literal-alg1";
}

StopRule parse_stop_rule(const std::string& text) {
  if (text == "contiguous-ratio") return StopRule::contiguous_ratio;
  if (text == "literal-alg1") return StopRule::literal_alg1;
  throw std::invalid_argument("unknown rule '" + text + "' (expected contiguous-ratio or literal-alg1)");
}

ReceptiveFieldPlan assign_receptive_fields(const HopScores& scores, double rho, Index layers, StopRule rule) {
  if (!(rho >= 0.0)) throw std::invalid_argument("rho must be >= 0");
  if (layers < 1) throw std::invalid_argument("plan needs at least one layer");
  if (layers > scores.hops())
    throw std::invalid_argument("plan depth " + std::to_string(layers) + " exceeds scored hops " +
                                std::to_string(scores.hops()));
  const Index n = scores.num_nodes();
  ReceptiveFieldPlan plan;
  plan.layers = layers;
  plan.rule = to_string(rule);
  plan.threshold = rho;
  plan.stop_depth.assign(static_cast<std::size_t>(n), 1);
  plan.flagged.assign(static_cast<std::size_t>(n), 0);
  if (rule == StopRule::literal_alg1)
    plan.explicit_masks.assign(static_cast<std::size_t>(layers), std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));

  for (Index i = 0; i < n; ++i) {
    const double first = scores.scores(i, 0);
    if (first == 0.0) {
      plan.flagged[i] = 1;
      if (rule == StopRule::literal_alg1) plan.explicit_masks[0][i] = 1;
      // A zero threshold never binds, flagged or not.
      if (rule == StopRule::contiguous_ratio && rho == 0.0) plan.stop_depth[i] = layers;
      continue;
    }
    const double bar = rho * first;
    if (rule == StopRule::contiguous_ratio) {
      Index depth = 1;
      while (depth < layers && scores.scores(i, depth) >= bar) ++depth;
      plan.stop_depth[i] = depth;
    } else {
      plan.explicit_masks[0][i] = 1;
      for (Index l = 1; l < layers; ++l) plan.explicit_masks[l][i] = scores.scores(i, l) <= bar;
      Index depth = 1;
      while (depth < layers && plan.explicit_masks[depth][i]) ++depth;
      plan.stop_depth[i] = depth;
    }
  }
  return plan;
}

ReceptiveFieldPlan oracle_receptive_fields(const Graph& graph, double epsilon, Index layers, bool literal_direction) {
  if (layers < 1) throw std::invalid_argument("plan needs at least one layer");
  const Index n = graph.num_nodes();
  ReceptiveFieldPlan plan;
  plan.layers = layers;
  plan.rule = literal_direction ? "oracle-literal" : "oracle";
  plan.threshold = epsilon;
  plan.stop_depth.assign(static_cast<std::size_t>(n), layers);
  plan.flagged.assign(static_cast<std::size_t>(n), 0);
  std::vector<Index> same(static_cast<std::size_t>(layers + 1));
  std::vector<Index> total(static_cast<std::size_t>(layers + 1));
  for (Index i = 0; i < n; ++i) {
    if (graph.degree(i) == 0) continue;
    const auto dist = bfs_distances(graph, i, layers);
    std::fill(same.begin(), same.end(), 0);
    std::fill(total.begin(), total.end(), 0);
    for (Index v = 0; v < n; ++v) {
      if (dist[v] < 1) continue;
      ++total[dist[v]];
      same[dist[v]] += graph.label(v) == graph.label(i);
    }
    Index cum_same = 0, cum_total = 0, depth = 0;
    for (Index k = 1; k <= layers; ++k) {
      cum_same += same[k];
      cum_total += total[k];
      const double h = static_cast<double>(cum_same) / static_cast<double>(cum_total);
      const bool keep = literal_direction ? h <= epsilon : h >= epsilon;
      if (!keep) break;
      depth = k;
    }
    plan.stop_depth[i] = std::max<Index>(depth, 1);
  }
  return plan;
}

void write_plan_json(const ReceptiveFieldPlan& plan, const std::filesystem::path& file) {
  nlohmann::json arr = nlohmann::json::array();
  for (Index i = 0; i < plan.num_nodes(); ++i) arr.push_back({{"node", i}, {"stop_depth", plan.stop_depth[i]}});
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << arr.dump() << '\n';
}

void write_scores_tsv(const HopScores& scores, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  char buf[64];
  for (Index i = 0; i < scores.num_nodes(); ++i) {
    out << i;
    for (Index k = 0; k < scores.hops(); ++k) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, scores.scores(i, k));
      out << '\t';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

}  // namespace hes
