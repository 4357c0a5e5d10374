// Command-line front end: training runs, rho sweeps, homophily stats, SBM
// bundles and theory reports.
#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

#include "hes/dataset.hpp"
#include "hes/experiment.hpp"
#include "hes/graph.hpp"
#include "hes/proxy.hpp"
#include "hes/receptive_field.hpp"
#include "hes/theory.hpp"

namespace {

using nlohmann::json;

struct RunFlags {
  std::string config;
  std::string dataset;
  std::string arch;
  int layers = 0;
  std::vector<double> rho;
  std::string rule;
  std::string proxy;
  std::vector<std::uint64_t> seeds;
  bool strict = false;
  bool parallel = false;
  std::string out;
  std::string plan;
  double epsilon = -1.0;
  int max_epochs = 0;
  int refresh = -1;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_hes) {
  cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--dataset", f.dataset, "graph bundle directory")->check(CLI::ExistingDirectory);
  cmd->add_option("--arch", f.arch, "mlp | gcn | sgc");
  cmd->add_option("--layers", f.layers, "propagation layers")->check(CLI::PositiveNumber);
  cmd->add_option("--seeds", f.seeds, "seed list (space or comma separated)")->delimiter(',');
  cmd->add_option("--max-epochs", f.max_epochs, "epoch cap")->check(CLI::PositiveNumber);
  cmd->add_flag("--strict", f.strict, "sequential, bit-reproducible execution (default)");
  cmd->add_flag("--parallel", f.parallel, "run seeds concurrently");
  cmd->add_option("--out", f.out, "output directory");
  if (!with_hes) return;
  cmd->add_option("--rho", f.rho, "filtering threshold(s)");
  cmd->add_option("--rule", f.rule, "contiguous-ratio | literal-alg1");
  cmd->add_option("--proxy", f.proxy, "mlp3 | gcn4 | sgc3");
  cmd->add_option("--plan", f.plan, "hes | oracle");
  cmd->add_option("--epsilon", f.epsilon, "oracle k-hop homophily threshold");
  cmd->add_option("--refresh", f.refresh, "proxy refresh period in epochs (0 = off)");
}

hes::ExperimentConfig build_config(const RunFlags& f) {
  hes::ExperimentConfig c = f.config.empty() ? hes::ExperimentConfig{} : hes::ExperimentConfig::load(f.config);
  if (!f.dataset.empty()) {
    c.dataset = f.dataset;
    c.sbm.reset();
  }
  if (!f.arch.empty()) c.model.arch = hes::parse_arch(f.arch);
  if (f.layers > 0) c.model.layers = f.layers;
  if (!f.rho.empty()) c.rho_grid = f.rho;
  if (!f.rule.empty()) c.rule = hes::parse_stop_rule(f.rule);
  if (!f.proxy.empty()) c.proxy.arch = hes::parse_proxy_arch(f.proxy);
  if (!f.seeds.empty()) c.seeds = f.seeds;
  if (f.max_epochs > 0) c.train.max_epochs = f.max_epochs;
  if (f.parallel) c.strict = false;
  if (f.strict) c.strict = true;
  if (!f.out.empty()) c.output = f.out;
  if (f.plan == "oracle")
    c.plan_source = hes::PlanSource::oracle;
  else if (f.plan == "hes")
    c.plan_source = hes::PlanSource::hes;
  else if (!f.plan.empty())
    throw std::invalid_argument("--plan must be hes or oracle");
  if (f.epsilon >= 0.0) c.oracle_epsilon = f.epsilon;
  if (f.refresh >= 0) c.refresh.period = f.refresh;
  return c;
}

void print_run_summary(const hes::RunReport& r) {
  std::cout << r.name << "  rho=" << r.rho << "  baseline test " << 100.0 * r.baseline_test.mean << " +- "
            << 100.0 * r.baseline_test.std;
  if (r.hes_test) std::cout << "  hes test " << 100.0 * r.hes_test->mean << " +- " << 100.0 * r.hes_test->std;
  std::cout << "  (" << r.baseline_test.count << "/" << r.seeds.size() << " seeds ok)\n";
}

int cmd_run(const RunFlags& f, bool hes_arm) {
  auto config = build_config(f);
  config.run_hes = hes_arm;
  if (hes_arm && config.rho_grid.size() > 1) config.rho_grid.resize(1);
  const auto report = hes::run(config);
  print_run_summary(report);
  if (config.output) {
    hes::write_run_outputs(config, report, *config.output);
  } else {
    std::cout << report.to_json().dump(2) << '\n';
  }
  return report.all_ok ? 0 : 1;
}

int cmd_sweep(const RunFlags& f) {
  auto config = build_config(f);
  if (f.rho.empty() && config.rho_grid.size() <= 1) config.rho_grid = hes::default_rho_grid();
  const auto sweep = hes::rho_sweep(config);
  for (const auto& p : sweep.points) print_run_summary(p.report);
  std::cout << "selected rho (validation) = " << sweep.points[sweep.best].rho << '\n';
  if (config.output)
    hes::write_sweep_outputs(config, sweep, *config.output);
  else
    std::cout << sweep.to_json().dump(2) << '\n';
  for (const auto& p : sweep.points)
    if (!p.report.all_ok) return 1;
  return 0;
}

json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_homophily(const std::string& dataset, const std::string& config_path, int hops, const std::string& proxy,
                  std::uint64_t seed, const std::string& out) {
  hes::ExperimentConfig c = config_path.empty() ? hes::ExperimentConfig{} : hes::ExperimentConfig::load(config_path);
  if (!dataset.empty()) {
    c.dataset = dataset;
    c.sbm.reset();
  }
  hes::BundleStats stats;
  const auto graph = hes::load_experiment_graph(c, &stats);
  json js;
  js["dataset"] = hes::to_json(stats);
  js["edge_homophily"] = nan_safe(graph.num_edges() ? hes::edge_homophily(graph) : NAN);
  json per_hop = json::array();
  for (int k = 1; k <= hops; ++k) {
    double total = 0.0;
    hes::Index count = 0;
    for (hes::NodeId v = 0; v < graph.num_nodes(); ++v) {
      if (graph.degree(v) == 0) continue;
      total += hes::khop_homophily(graph, v, k);
      ++count;
    }
    per_hop.push_back({{"k", k}, {"mean_node_homophily", nan_safe(count ? total / count : NAN)}});
  }
  js["khop"] = per_hop;
  std::filesystem::path dir;
  if (!out.empty()) {
    dir = out;
    std::filesystem::create_directories(dir);
  }
  if (!proxy.empty()) {
    c.proxy.arch = hes::parse_proxy_arch(proxy);
    c.proxy.hyper = c.train;
    hes::ProxyTrainer trainer(graph, c.proxy, hes::derive_seed(seed, 2));
    const auto& fit = trainer.fit();
    const auto mask = hes::build_mask(graph, trainer.pseudo_labels());
    const auto scores = hes::hop_scores(mask, graph, hops, c.exact_threshold);
    js["proxy"] = {{"arch", hes::to_string(c.proxy.arch)},
                   {"val_acc", fit.val_acc},
                   {"test_acc", fit.test_acc},
                   {"mask_mean_strength", mask.mean_strength()}};
    if (!out.empty()) {
      hes::write_mask_tsv(mask, dir / "mask.tsv");
      hes::write_scores_tsv(scores, dir / "scores.tsv");
    }
  }
  const auto text = js.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream(dir / "homophily.json", std::ios::binary) << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"per-node receptive-field early stopping for GNNs"};
  app.require_subcommand(1);

  RunFlags train_flags, hes_flags, sweep_flags;
  auto* train_cmd = app.add_subcommand("train", "train the unplanned baseline only");
  add_run_flags(train_cmd, train_flags, false);
  auto* hes_cmd = app.add_subcommand("hes", "train baseline and planned model");
  add_run_flags(hes_cmd, hes_flags, true);
  auto* sweep_cmd = app.add_subcommand("sweep-rho", "rho grid search, selection on validation");
  add_run_flags(sweep_cmd, sweep_flags, true);

  std::string h_dataset, h_config, h_proxy, h_out;
  int h_hops = 4;
  std::uint64_t h_seed = 0;
  auto* hom_cmd = app.add_subcommand("homophily", "homophily statistics, optional proxy mask and hop scores");
  hom_cmd->add_option("--dataset", h_dataset)->check(CLI::ExistingDirectory);
  hom_cmd->add_option("--config", h_config)->check(CLI::ExistingFile);
  hom_cmd->add_option("--hops", h_hops)->check(CLI::PositiveNumber);
  hom_cmd->add_option("--proxy", h_proxy, "mlp3 | gcn4 | sgc3");
  hom_cmd->add_option("--seed", h_seed);
  hom_cmd->add_option("--out", h_out);

  hes::SbmSpec sbm;
  std::string sbm_out, sbm_name = "sbm";
  auto* sbm_cmd = app.add_subcommand("sbm-gen", "write a stochastic block model graph bundle");
  sbm_cmd->add_option("--clusters", sbm.clusters)->check(CLI::PositiveNumber);
  sbm_cmd->add_option("--size", sbm.cluster_size)->check(CLI::PositiveNumber);
  sbm_cmd->add_option("--p", sbm.p);
  sbm_cmd->add_option("--q", sbm.q);
  sbm_cmd->add_option("--seed", sbm.seed);
  sbm_cmd->add_option("--features", sbm.feature_dim);
  sbm_cmd->add_option("--signal", sbm.feature_signal);
  sbm_cmd->add_flag("--allow-q-above-p", sbm.allow_q_above_p);
  sbm_cmd->add_option("--name", sbm_name);
  sbm_cmd->add_option("--out", sbm_out)->required();

  hes::Index t_n = 3, t_l = 10000;
  double t_p = 0.5, t_q = 0.1;
  std::string t_out;
  auto* theory_cmd = app.add_subcommand("theory", "SBM propagation spectrum and layer product report");
  theory_cmd->add_option("--N", t_n, "nodes per class")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--p", t_p);
  theory_cmd->add_option("--q", t_q);
  theory_cmd->add_option("--L", t_l, "layers")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--out", t_out, "write JSON here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_run(train_flags, false);
    if (*hes_cmd) return cmd_run(hes_flags, true);
    if (*sweep_cmd) return cmd_sweep(sweep_flags);
    if (*hom_cmd) return cmd_homophily(h_dataset, h_config, h_hops, h_proxy, h_seed, h_out);
    if (*sbm_cmd) {
      const auto graph = hes::generate_sbm(sbm);
      hes::write_bundle(graph, sbm_name, sbm_out);
      std::cout << hes::to_json(hes::compute_stats(graph, sbm_name)).dump(2) << '\n';
      return 0;
    }
    if (*theory_cmd) {
      const auto text = hes::theory::report(t_n, t_p, t_q, t_l).dump(2) + "\n";
      if (t_out.empty())
        std::cout << text;
      else
        std::ofstream(t_out, std::ios::binary) << text;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
