#include "hes/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <set>

namespace hes {

namespace fs = std::filesystem;
using nlohmann::json;

// --- config ------------------------------------------------------------------------

namespace {

void reject_unknown(const json& js, std::initializer_list<const char*> known, const std::string& where) {
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : js.items())
    if (!allowed.count(key)) throw std::invalid_argument("unknown config key '" + key + "' in " + where);
}

template <class T>
void read_if(const json& js, const char* key, T& out) {
  if (js.contains(key) && !js.at(key).is_null()) out = js.at(key).get<T>();
}

json sbm_to_json(const SbmSpec& s) {
  return {{"clusters", s.clusters},       {"cluster_size", s.cluster_size}, {"p", s.p},
          {"q", s.q},                     {"seed", s.seed},                 {"allow_q_above_p", s.allow_q_above_p},
          {"feature_dim", s.feature_dim}, {"feature_signal", s.feature_signal}};
}

SbmSpec sbm_from_json(const json& js) {
  reject_unknown(js, {"clusters", "cluster_size", "p", "q", "seed", "allow_q_above_p", "feature_dim", "feature_signal"},
                 "sbm");
  SbmSpec s;
  read_if(js, "clusters", s.clusters);
  read_if(js, "cluster_size", s.cluster_size);
  read_if(js, "p", s.p);
  read_if(js, "q", s.q);
  read_if(js, "seed", s.seed);
  read_if(js, "allow_q_above_p", s.allow_q_above_p);
  read_if(js, "feature_dim", s.feature_dim);
  read_if(js, "feature_signal", s.feature_signal);
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.has_value() == sbm.has_value())
    throw std::invalid_argument("config needs exactly one of 'dataset' or 'sbm'");
  if (dataset && !fs::is_directory(*dataset))
    throw std::invalid_argument("dataset directory does not exist: " + dataset->string());
  if (sbm) sbm->validate();
  model.validate();
  if (seeds.empty()) throw std::invalid_argument("config needs at least one seed");
  if (rho_grid.empty()) throw std::invalid_argument("rho grid is empty");
  for (double r : rho_grid)
    if (!(r >= 0.0)) throw std::invalid_argument("rho values must be >= 0");
  if (max_hops != 0 && max_hops < model.layers) throw std::invalid_argument("max_hops must be >= model layers");
  if (split_mode != "bundle" && split_mode != "random")
    throw std::invalid_argument("split mode must be 'bundle' or 'random'");
  if (refresh.period < 0) throw std::invalid_argument("refresh period must be >= 0");
}

json ExperimentConfig::to_json() const {
  json js;
  js["name"] = name;
  js["dataset"] = dataset ? json(dataset->generic_string()) : json(nullptr);
  js["sbm"] = sbm ? sbm_to_json(*sbm) : json(nullptr);
  js["model"] = {{"arch", hes::to_string(model.arch)},
                 {"layers", model.layers},
                 {"hidden", model.hidden},
                 {"dropout", model.dropout},
                 {"activation", model.activation == Activation::relu ? "relu" : "identity"}};
  js["proxy"] = {{"arch", hes::to_string(proxy.arch)}, {"hidden", proxy.hidden}, {"dropout", proxy.dropout}};
  js["train"] = {{"max_epochs", train.max_epochs},
                 {"patience", train.patience},
                 {"lr", train.adam.lr},
                 {"weight_decay", train.weight_decay}};
  js["hes"] = {{"enabled", run_hes},
               {"plan", plan_source == PlanSource::hes ? "hes" : "oracle"},
               {"rho_grid", rho_grid},
               {"rule", hes::to_string(rule)},
               {"max_hops", max_hops},
               {"exact_threshold", exact_threshold},
               {"epsilon", oracle_epsilon},
               {"oracle_literal", oracle_literal},
               {"refresh_period", refresh.period},
               {"refresh_epochs", refresh.finetune_epochs},
               {"refresh_lr", refresh.lr}};
  js["splits"] = {{"mode", split_mode}, {"fractions", split_fractions}};
  js["seeds"] = seeds;
  js["strict"] = strict;
  js["output"] = output ? json(output->generic_string()) : json(nullptr);
  return js;
}

ExperimentConfig ExperimentConfig::from_json(const json& js) {
  reject_unknown(js, {"name", "dataset", "sbm", "model", "proxy", "train", "hes", "splits", "seeds", "strict", "output"},
                 "config");
  ExperimentConfig c;
  read_if(js, "name", c.name);
  if (js.contains("dataset") && !js["dataset"].is_null()) c.dataset = js["dataset"].get<std::string>();
  if (js.contains("sbm") && !js["sbm"].is_null()) c.sbm = sbm_from_json(js["sbm"]);
  if (js.contains("model")) {
    const auto& m = js["model"];
    reject_unknown(m, {"arch", "layers", "hidden", "dropout", "activation"}, "model");
    if (m.contains("arch")) c.model.arch = parse_arch(m["arch"].get<std::string>());
    read_if(m, "layers", c.model.layers);
    read_if(m, "hidden", c.model.hidden);
    read_if(m, "dropout", c.model.dropout);
    if (m.contains("activation"))
      c.model.activation = m["activation"].get<std::string>() == "identity" ? Activation::identity : Activation::relu;
  }
  if (js.contains("proxy")) {
    const auto& p = js["proxy"];
    reject_unknown(p, {"arch", "hidden", "dropout"}, "proxy");
    if (p.contains("arch")) c.proxy.arch = parse_proxy_arch(p["arch"].get<std::string>());
    read_if(p, "hidden", c.proxy.hidden);
    read_if(p, "dropout", c.proxy.dropout);
  }
  if (js.contains("train")) {
    const auto& t = js["train"];
    reject_unknown(t, {"max_epochs", "patience", "lr", "weight_decay"}, "train");
    read_if(t, "max_epochs", c.train.max_epochs);
    read_if(t, "patience", c.train.patience);
    read_if(t, "lr", c.train.adam.lr);
    read_if(t, "weight_decay", c.train.weight_decay);
  }
  c.proxy.hyper = c.train;
  if (js.contains("hes")) {
    const auto& h = js["hes"];
    reject_unknown(h, {"enabled", "plan", "rho", "rho_grid", "rule", "max_hops", "exact_threshold", "epsilon",
                       "oracle_literal", "refresh_period", "refresh_epochs", "refresh_lr"},
                   "hes");
    read_if(h, "enabled", c.run_hes);
    if (h.contains("plan")) {
      const auto p = h["plan"].get<std::string>();
      if (p == "hes")
        c.plan_source = PlanSource::hes;
      else if (p == "oracle")
        c.plan_source = PlanSource::oracle;
      else
        throw std::invalid_argument("hes.plan must be 'hes' or 'oracle'");
    }
    if (h.contains("rho")) c.rho_grid = {h["rho"].get<double>()};
    read_if(h, "rho_grid", c.rho_grid);
    if (h.contains("rule")) c.rule = parse_stop_rule(h["rule"].get<std::string>());
    read_if(h, "max_hops", c.max_hops);
    read_if(h, "exact_threshold", c.exact_threshold);
    read_if(h, "epsilon", c.oracle_epsilon);
    read_if(h, "oracle_literal", c.oracle_literal);
    read_if(h, "refresh_period", c.refresh.period);
    read_if(h, "refresh_epochs", c.refresh.finetune_epochs);
    read_if(h, "refresh_lr", c.refresh.lr);
  }
  if (js.contains("splits")) {
    const auto& s = js["splits"];
    reject_unknown(s, {"mode", "fractions"}, "splits");
    read_if(s, "mode", c.split_mode);
    read_if(s, "fractions", c.split_fractions);
  }
  read_if(js, "seeds", c.seeds);
  read_if(js, "strict", c.strict);
  if (js.contains("output") && !js["output"].is_null()) c.output = js["output"].get<std::string>();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot open config " + file.string());
  json js;
  try {
    js = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + file.string() + ": " + e.what());
  }
  return from_json(js);
}

// --- reports ---------------------------------------------------------------------------

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.count = static_cast<Index>(values.size());
  if (values.empty()) {
    a.mean = a.std = std::numeric_limits<double>::quiet_NaN();
    return a;
  }
  double total = 0.0;
  for (double v : values) total += v;
  a.mean = total / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

json to_json(const MacsReport& m) {
  return {{"aggregation", m.aggregation},   {"transform", m.transform},     {"total", m.total},
          {"active_slots", m.active_slots}, {"total_slots", m.total_slots}, {"sparsity_percent", m.sparsity_percent}};
}

json to_json(const PlanSummary& s) {
  return {{"depth_histogram", s.depth_histogram},
          {"mean_depth", s.mean_depth},
          {"early_stopped", s.early_stopped},
          {"flagged", s.flagged}};
}

json to_json(const BundleStats& s) {
  return {{"name", s.name},
          {"num_nodes", s.num_nodes},
          {"num_edges", s.num_edges},
          {"num_classes", s.num_classes},
          {"feature_dim", s.feature_dim},
          {"isolated_nodes", s.isolated_nodes},
          {"graph_homophily", std::isfinite(s.graph_homophily) ? json(s.graph_homophily) : json(nullptr)}};
}

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json arm_json(const ArmResult& a) {
  return {{"test_acc", num(a.test_acc)},     {"val_acc", num(a.val_acc)},       {"val_loss", num(a.val_loss)},
          {"best_epoch", a.best_epoch},       {"epochs_run", a.epochs_run},      {"macs", to_json(a.macs)}};
}

json agg_json(const Aggregate& a) { return {{"mean", num(a.mean)}, {"std", num(a.std)}, {"count", a.count}}; }

}  // namespace

json RunReport::to_json() const {
  json js;
  js["name"] = name;
  js["rho"] = rho;
  js["dataset"] = hes::to_json(stats);
  js["seeds"] = json::array();
  for (const auto& s : seeds) {
    json e = {{"seed", s.seed}, {"ok", s.ok}};
    if (!s.ok) {
      e["error"] = s.error;
      e["baseline"] = nullptr;
      e["hes"] = nullptr;
      e["plan_summary"] = nullptr;
      e["proxy"] = nullptr;
      js["seeds"].push_back(std::move(e));
      continue;
    }
    e["baseline"] = arm_json(s.baseline);
    e["hes"] = s.hes ? arm_json(*s.hes) : json(nullptr);
    e["plan_summary"] = s.plan ? hes::to_json(summarize(*s.plan)) : json(nullptr);
    if (s.proxy_val_acc)
      e["proxy"] = {{"val_acc", num(*s.proxy_val_acc)},
                    {"test_acc", num(s.proxy_test_acc.value_or(std::numeric_limits<double>::quiet_NaN()))},
                    {"mask_mean_strength", num(s.mask_mean_strength.value_or(std::numeric_limits<double>::quiet_NaN()))}};
    else
      e["proxy"] = nullptr;
    js["seeds"].push_back(std::move(e));
  }
  json agg;
  agg["baseline"] = {{"test", agg_json(baseline_test)}, {"val", agg_json(baseline_val)}};
  if (hes_test) {
    agg["hes"] = {{"test", agg_json(*hes_test)}, {"val", agg_json(*hes_val)}};
    agg["delta_test_mean"] = num(hes_test->mean - baseline_test.mean);
  } else {
    agg["hes"] = nullptr;
    agg["delta_test_mean"] = nullptr;
  }
  js["aggregate"] = std::move(agg);
  js["all_ok"] = all_ok;
  return js;
}

json SweepReport::to_json() const {
  json js;
  js["name"] = name;
  js["grid"] = json::array();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : points) {
    const auto& r = p.report;
    json e = {{"rho", p.rho}};
    e["val_mean"] = r.hes_val ? num(r.hes_val->mean) : json(nullptr);
    e["test_mean"] = r.hes_test ? num(r.hes_test->mean) : json(nullptr);
    e["test_std"] = r.hes_test ? num(r.hes_test->std) : json(nullptr);
    e["report"] = r.to_json();
    if (r.hes_test && std::isfinite(r.hes_test->mean)) {
      lo = std::min(lo, r.hes_test->mean);
      hi = std::max(hi, r.hes_test->mean);
    }
    js["grid"].push_back(std::move(e));
  }
  js["best_index"] = best;
  js["best_rho"] = points.empty() ? json(nullptr) : json(points[best].rho);
  js["test_spread"] = hi >= lo ? json(hi - lo) : json(nullptr);
  return js;
}

std::size_t select_best(std::span<const SelectionInput> inputs) {
  if (inputs.empty()) throw std::invalid_argument("select_best: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    const double v = inputs[i].val_mean;
    const double b = inputs[best].val_mean;
    if (std::isfinite(v) && (!std::isfinite(b) || v > b)) best = i;
  }
  return best;
}

// --- running ---------------------------------------------------------------------------

Graph load_experiment_graph(const ExperimentConfig& config, BundleStats* stats) {
  config.validate();
  if (config.dataset) {
    auto loaded = load_bundle(*config.dataset);
    if (stats) *stats = loaded.stats;
    return std::move(loaded.graph);
  }
  Graph g = generate_sbm(*config.sbm);
  if (stats) *stats = compute_stats(g, config.name + "-sbm");
  return g;
}

namespace {

ArmResult make_arm(const TrainResult& r, const ModelSpec& spec, const Graph& graph) {
  ArmResult a;
  a.test_acc = r.test_acc;
  a.val_acc = r.val_acc;
  a.val_loss = r.best_val_loss;
  a.best_epoch = r.best_epoch;
  a.epochs_run = static_cast<Index>(r.history.size());
  a.macs = count_macs(spec, graph, r.model.plan ? &*r.model.plan : nullptr);
  a.history = r.history;
  return a;
}

void check_selection_isolated(const Graph& g) {
  // Selection reads validation only; the two splits must not overlap.
  const auto& s = g.splits();
  std::vector<NodeId> val = s.val, test = s.test;
  std::sort(val.begin(), val.end());
  std::sort(test.begin(), test.end());
  std::vector<NodeId> both;
  std::set_intersection(val.begin(), val.end(), test.begin(), test.end(), std::back_inserter(both));
  if (!both.empty()) throw std::logic_error("validation and test splits overlap; selection would see test nodes");
}

/// One SeedResult per rho.
std::vector<SeedResult> process_seed(const ExperimentConfig& config, const Graph& graph, std::uint64_t seed) {
  const auto& rhos = config.rho_grid;
  std::vector<SeedResult> out(rhos.size());
  for (auto& r : out) r.seed = seed;
  try {
    const Graph g = config.split_mode == "random"
                        ? graph.with_splits(make_splits(graph, config.split_fractions, derive_seed(seed, 1)))
                        : graph;
    check_selection_isolated(g);
    const auto baseline = train(g, config.model, nullptr, config.train, seed);
    const ArmResult base_arm = make_arm(baseline, config.model, g);
    for (auto& r : out) r.baseline = base_arm;
    if (!config.run_hes) return out;

    const Index layers = config.model.layers;
    if (config.plan_source == PlanSource::oracle) {
      const auto plan = oracle_receptive_fields(g, config.oracle_epsilon, layers, config.oracle_literal);
      const auto hes = train(g, config.model, &plan, config.train, seed);
      for (auto& r : out) {
        r.hes = make_arm(hes, config.model, g);
        r.plan = hes.model.plan;
      }
      return out;
    }

    ProxyConfig proxy_cfg = config.proxy;
    proxy_cfg.hyper = config.train;
    ProxyTrainer trainer(g, proxy_cfg, derive_seed(seed, 2));
    const auto& proxy_fit = trainer.fit();
    const auto mask = build_mask(g, trainer.pseudo_labels());
    const Index hops = config.max_hops ? config.max_hops : layers;
    const auto scores = hop_scores(mask, g, hops, config.exact_threshold);

    const auto same_depths = [](const ReceptiveFieldPlan& a, const ReceptiveFieldPlan& b) {
      return a.stop_depth == b.stop_depth && a.explicit_masks == b.explicit_masks;
    };
    for (std::size_t k = 0; k < rhos.size(); ++k) {
      const double rho = rhos[k];
      const auto plan = assign_receptive_fields(scores, rho, layers, config.rule);
      out[k].proxy_val_acc = proxy_fit.val_acc;
      out[k].proxy_test_acc = proxy_fit.test_acc;
      out[k].mask_mean_strength = mask.mean_strength();
      // Training is a pure function of the depths when the plan is frozen.
      if (config.refresh.period == 0) {
        if (plan.is_full()) {
          out[k].hes = base_arm;
          out[k].plan = plan;
          continue;
        }
        const auto hit = std::find_if(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k),
                                      [&](const SeedResult& r) { return r.plan && same_depths(*r.plan, plan); });
        if (hit != out.begin() + static_cast<std::ptrdiff_t>(k)) {
          out[k].hes = hit->hes;
          out[k].plan = plan;
          continue;
        }
      }
      ProxyTrainer refresher = trainer;
      PlanHook hook;
      if (config.refresh.period > 0) {
        hook = [&, rho](Index epoch, const TrainedModel&) -> std::optional<ReceptiveFieldPlan> {
          auto refreshed = refresh_cycle(g, refresher, epoch, config.refresh);
          if (!refreshed) return std::nullopt;
          return assign_receptive_fields(hop_scores(*refreshed, g, hops, config.exact_threshold), rho, layers,
                                         config.rule);
        };
      }
      const auto hes = train(g, config.model, &plan, config.train, seed, hook);
      out[k].hes = make_arm(hes, config.model, g);
      out[k].plan = hes.model.plan;
    }
  } catch (const std::exception& e) {
    std::cerr << "seed " << seed << " aborted: " << e.what() << '\n';
    for (auto& r : out) {
      r = SeedResult{};
      r.seed = seed;
      r.ok = false;
      r.error = e.what();
    }
  }
  return out;
}

RunReport fold(const ExperimentConfig& config, const BundleStats& stats, double rho, std::vector<SeedResult> seeds) {
  RunReport r;
  r.name = config.name;
  r.rho = rho;
  r.stats = stats;
  std::vector<double> bt, bv, ht, hv;
  for (const auto& s : seeds) {
    if (!s.ok) {
      r.all_ok = false;
      continue;
    }
    bt.push_back(s.baseline.test_acc);
    bv.push_back(s.baseline.val_acc);
    if (s.hes) {
      ht.push_back(s.hes->test_acc);
      hv.push_back(s.hes->val_acc);
    }
  }
  r.baseline_test = aggregate(bt);
  r.baseline_val = aggregate(bv);
  if (config.run_hes) {
    r.hes_test = aggregate(ht);
    r.hes_val = aggregate(hv);
  }
  r.seeds = std::move(seeds);
  return r;
}

std::vector<std::vector<SeedResult>> run_all_seeds(const ExperimentConfig& config, const Graph& graph) {
  std::vector<std::vector<SeedResult>> per_seed;
  if (config.strict || config.seeds.size() == 1) {
    for (auto seed : config.seeds) per_seed.push_back(process_seed(config, graph, seed));
  } else {
    std::vector<std::future<std::vector<SeedResult>>> futures;
    for (auto seed : config.seeds)
      futures.push_back(std::async(std::launch::async, [&, seed] { return process_seed(config, graph, seed); }));
    // Collected in seed-list order regardless of completion order.
    for (auto& f : futures) per_seed.push_back(f.get());
  }
  return per_seed;
}

}  // namespace

SweepReport rho_sweep(const ExperimentConfig& config, const Graph& graph, const BundleStats& stats) {
  config.validate();
  const auto per_seed = run_all_seeds(config, graph);
  SweepReport sweep;
  sweep.name = config.name;
  std::vector<SelectionInput> selection;
  for (std::size_t k = 0; k < config.rho_grid.size(); ++k) {
    std::vector<SeedResult> seeds;
    for (const auto& s : per_seed) seeds.push_back(s[k]);
    RhoPoint point{config.rho_grid[k], fold(config, stats, config.rho_grid[k], std::move(seeds))};
    const double val = point.report.hes_val ? point.report.hes_val->mean : std::numeric_limits<double>::quiet_NaN();
    selection.push_back({point.rho, val});
    sweep.points.push_back(std::move(point));
  }
  sweep.best = select_best(selection);
  return sweep;
}

SweepReport rho_sweep(const ExperimentConfig& config) {
  BundleStats stats;
  const Graph graph = load_experiment_graph(config, &stats);
  return rho_sweep(config, graph, stats);
}

RunReport run(const ExperimentConfig& config, const Graph& graph, const BundleStats& stats) {
  ExperimentConfig single = config;
  single.rho_grid.resize(1);
  auto sweep = rho_sweep(single, graph, stats);
  return std::move(sweep.points.front().report);
}

RunReport run(const ExperimentConfig& config) {
  BundleStats stats;
  const Graph graph = load_experiment_graph(config, &stats);
  return run(config, graph, stats);
}

// --- output --------------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

void write_history_csv(const std::vector<EpochRecord>& history, const fs::path& file) {
  std::string text = "epoch,train_loss,val_loss,train_acc,val_acc,test_acc\n";
  for (const auto& r : history)
    text += std::to_string(r.epoch) + ',' + fmt(r.train_loss) + ',' + fmt(r.val_loss) + ',' + fmt(r.train_acc) + ',' +
            fmt(r.val_acc) + ',' + fmt(r.test_acc) + '\n';
  write_text(file, text);
}

void write_seed_files(const RunReport& report, const fs::path& dir) {
  for (const auto& s : report.seeds) {
    if (!s.ok) continue;
    const auto tag = std::to_string(s.seed);
    write_history_csv(s.baseline.history, dir / ("history_seed" + tag + "_baseline.csv"));
    if (s.hes) write_history_csv(s.hes->history, dir / ("history_seed" + tag + "_hes.csv"));
    if (s.plan) write_plan_json(*s.plan, dir / ("plan_seed" + tag + ".json"));
  }
}

}  // namespace

void write_run_outputs(const ExperimentConfig& config, const RunReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "config.json", config.to_json().dump(2) + "\n");
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");
  write_seed_files(report, dir);
}

void write_sweep_outputs(const ExperimentConfig& config, const SweepReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "config.json", config.to_json().dump(2) + "\n");
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");
  std::string csv = "rho,val_mean,test_mean,test_std\n";
  for (std::size_t k = 0; k < report.points.size(); ++k) {
    const auto& p = report.points[k];
    const auto sub = dir / ("rho_" + std::to_string(k));
    fs::create_directories(sub);
    write_seed_files(p.report, sub);
    const auto& r = p.report;
    csv += fmt(p.rho) + ',' + fmt(r.hes_val ? r.hes_val->mean : NAN) + ',' + fmt(r.hes_test ? r.hes_test->mean : NAN) +
           ',' + fmt(r.hes_test ? r.hes_test->std : NAN) + '\n';
  }
  write_text(dir / "sweep.csv", csv);
}

}  // namespace hes
