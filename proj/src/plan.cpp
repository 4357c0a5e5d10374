#include "hes/plan.hpp"

#include <stdexcept>
#include <string>

namespace hes {

bool ReceptiveFieldPlan::is_full() const {
  if (!explicit_masks.empty()) {
    for (const auto& layer : explicit_masks)
      for (auto active : layer)
        if (!active) return false;
    return true;
  }
  for (Index d : stop_depth)
    if (d != layers) return false;
  return true;
}

void ReceptiveFieldPlan::validate() const {
  if (layers < 1) throw std::invalid_argument("plan needs at least one layer");
  for (std::size_t i = 0; i < stop_depth.size(); ++i) {
    if (stop_depth[i] < 1 || stop_depth[i] > layers)
      throw std::invalid_argument("stop depth of node " + std::to_string(i) + " outside [1, L]");
  }
  if (!explicit_masks.empty()) {
    if (static_cast<Index>(explicit_masks.size()) != layers)
      throw std::invalid_argument("explicit masks must have one entry per layer");
    for (const auto& m : explicit_masks)
      if (m.size() != stop_depth.size()) throw std::invalid_argument("explicit mask size != node count");
  }
  if (!flagged.empty() && flagged.size() != stop_depth.size())
    throw std::invalid_argument("flag vector size != node count");
}

ReceptiveFieldPlan ReceptiveFieldPlan::full(Index num_nodes, Index layers) {
  ReceptiveFieldPlan plan;
  plan.layers = layers;
  plan.stop_depth.assign(static_cast<std::size_t>(num_nodes), layers);
  plan.flagged.assign(static_cast<std::size_t>(num_nodes), 0);
  plan.rule = "full";
  return plan;
}

std::vector<std::vector<std::uint8_t>> layer_aggregation_masks(const ReceptiveFieldPlan& plan, Index layers) {
  plan.validate();
  if (layers != plan.layers)
    throw std::invalid_argument("plan built for " + std::to_string(plan.layers) + " layers, model has " +
                                std::to_string(layers));
  if (!plan.explicit_masks.empty()) return plan.explicit_masks;
  std::vector<std::vector<std::uint8_t>> masks(static_cast<std::size_t>(layers),
                                               std::vector<std::uint8_t>(plan.stop_depth.size(), 0));
  for (Index l = 1; l <= layers; ++l)
    for (std::size_t i = 0; i < plan.stop_depth.size(); ++i) masks[l - 1][i] = l <= plan.stop_depth[i];
  return masks;
}

PlanSummary summarize(const ReceptiveFieldPlan& plan) {
  PlanSummary s;
  s.depth_histogram.assign(static_cast<std::size_t>(plan.layers), 0);
  double total = 0.0;
  for (Index d : plan.stop_depth) {
    ++s.depth_histogram[d - 1];
    total += static_cast<double>(d);
    s.early_stopped += d < plan.layers;
  }
  for (auto f : plan.flagged) s.flagged += f != 0;
  s.mean_depth = plan.stop_depth.empty() ? 0.0 : total / static_cast<double>(plan.stop_depth.size());
  return s;
}

}  // namespace hes
