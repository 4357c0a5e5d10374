#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hes/dataset.hpp"
#include "hes/models.hpp"
#include "hes/proxy.hpp"
#include "hes/receptive_field.hpp"

namespace hes {

enum class PlanSource { hes, oracle };

struct ExperimentConfig {
  std::string name = "experiment";
  /// Exactly one of dataset / sbm.
  std::optional<std::filesystem::path> dataset;
  std::optional<SbmSpec> sbm;

  ModelSpec model{};
  ProxyConfig proxy{};
  TrainHyper train{};

  bool run_hes = true;
  PlanSource plan_source = PlanSource::hes;
  std::vector<double> rho_grid{1e-2};
  StopRule rule = StopRule::contiguous_ratio;
  Index max_hops = 0;  // 0: use the model depth
  Index exact_threshold = 5000;
  double oracle_epsilon = 0.3;
  bool oracle_literal = false;
  RefreshConfig refresh{};

  /// "bundle" keeps the bundle's splits; "random" draws stratified splits
  /// per seed with `split_fractions`.
  std::string split_mode = "bundle";
  SplitFractions split_fractions{0.48, 0.32, 0.20};

  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool strict = true;
  std::optional<std::filesystem::path> output;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& js);
  static ExperimentConfig load(const std::filesystem::path& file);
};

struct ArmResult {
  double test_acc = 0.0;
  double val_acc = 0.0;
  double val_loss = 0.0;
  Index best_epoch = 0;
  Index epochs_run = 0;
  MacsReport macs;
  std::vector<EpochRecord> history;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  ArmResult baseline;
  std::optional<ArmResult> hes;
  std::optional<ReceptiveFieldPlan> plan;
  std::optional<double> proxy_val_acc;
  std::optional<double> proxy_test_acc;
  std::optional<double> mask_mean_strength;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (0 for one run)
  Index count = 0;
};
Aggregate aggregate(std::span<const double> values);

struct RunReport {
  std::string name;
  double rho = 0.0;
  BundleStats stats;
  std::vector<SeedResult> seeds;
  Aggregate baseline_test, baseline_val;
  std::optional<Aggregate> hes_test, hes_val;
  bool all_ok = true;

  nlohmann::json to_json() const;
};

/// Loads or synthesizes the configured graph.
Graph load_experiment_graph(const ExperimentConfig& config, BundleStats* stats = nullptr);

/// Per seed: baseline training, then (if enabled) proxy -> mask -> hop
/// scores -> plan -> training with the plan. Uses the first rho in the grid.
/// A failing seed is logged and recorded; the others proceed.
RunReport run(const ExperimentConfig& config);
RunReport run(const ExperimentConfig& config, const Graph& graph, const BundleStats& stats);

struct RhoPoint {
  double rho = 0.0;
  RunReport report;
};

struct SweepReport {
  std::string name;
  std::vector<RhoPoint> points;
  std::size_t best = 0;

  nlohmann::json to_json() const;
  const RunReport& best_report() const { return points[best].report; }
};

/// Validation-only view of a sweep point.
struct SelectionInput {
  double rho = 0.0;
  double val_mean = 0.0;
};

/// Highest validation mean; ties go to the earliest grid entry.
std::size_t select_best(std::span<const SelectionInput> inputs);

/// One run per grid value; proxy, mask, scores and baselines are shared
/// across the grid within a seed.
SweepReport rho_sweep(const ExperimentConfig& config);
SweepReport rho_sweep(const ExperimentConfig& config, const Graph& graph, const BundleStats& stats);

/// Writes config.json, report.json, plan_seed<S>.json and
/// history_seed<S>_<arm>.csv under `dir`.
void write_run_outputs(const ExperimentConfig& config, const RunReport& report, const std::filesystem::path& dir);
void write_sweep_outputs(const ExperimentConfig& config, const SweepReport& report, const std::filesystem::path& dir);

nlohmann::json to_json(const MacsReport& macs);
nlohmann::json to_json(const PlanSummary& summary);
nlohmann::json to_json(const BundleStats& stats);

}  // namespace hes
