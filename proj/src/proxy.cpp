#include "hes/proxy.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <locale>

namespace hes {

std::string to_string(ProxyArch arch) {
  switch (arch) {
    case ProxyArch::mlp3: return "mlp3";
    case ProxyArch::gcn4: return "gcn4";
    case ProxyArch::sgc3: return "sgc3";
  }
  return "?";
}

ProxyArch parse_proxy_arch(const std::string& text) {
  if (text == "mlp3") return ProxyArch::mlp3;
  if (text == "gcn4") return ProxyArch::gcn4;
  if (text == "sgc3") return ProxyArch::sgc3;
  throw std::invalid_argument("unknown proxy '" + text + "' (expected mlp3, gcn4 or sgc3)");
}

ModelSpec proxy_model_spec(ProxyArch arch, Index hidden, double dropout) {
  ModelSpec spec;
  spec.hidden = hidden;
  spec.dropout = dropout;
  switch (arch) {
    case ProxyArch::mlp3:
      spec.arch = Arch::mlp;
      spec.layers = 3;
      break;
    case ProxyArch::gcn4:
      spec.arch = Arch::gcn;
      spec.layers = 4;
      break;
    case ProxyArch::sgc3:
      spec.arch = Arch::sgc;
      spec.layers = 3;
      break;
  }
  return spec;
}

void PseudoLabels::validate(double tol) const {
  for (Index i = 0; i < probs.rows(); ++i) {
    double total = 0.0;
    for (Index j = 0; j < probs.cols(); ++j) {
      if (!(probs(i, j) >= 0.0)) throw std::invalid_argument("pseudo-label row " + std::to_string(i) + " has a negative entry");
      total += probs(i, j);
    }
    if (std::abs(total - 1.0) > tol)
      throw std::invalid_argument("pseudo-label row " + std::to_string(i) + " does not sum to 1");
  }
}

double HomophilyMask::mean_strength() const {
  if (mask.nnz() == 0) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (double v : mask.values()) total += v;
  return total / static_cast<double>(mask.nnz());
}

// --- proxy training -------------------------------------------------------------

ProxyTrainer::ProxyTrainer(const Graph& graph, ProxyConfig config, std::uint64_t seed)
    : graph_(graph), config_(std::move(config)), seed_(seed) {}

const TrainResult& ProxyTrainer::fit() {
  const auto spec = proxy_model_spec(config_.arch, config_.hidden, config_.dropout);
  fit_result_ = train(graph_, spec, nullptr, config_.hyper, seed_);
  model_ = fit_result_.model;
  model_.weight(0).weight_decay = config_.hyper.weight_decay;
  adam_.emplace(config_.hyper.adam);
  dropout_rng_.emplace(derive_seed(seed_, 201));
  return fit_result_;
}

void ProxyTrainer::finetune(Index epochs, double lr) {
  if (!adam_) throw std::logic_error("ProxyTrainer::finetune called before fit");
  adam_->set_lr(lr);
  const auto prop = make_propagation(graph_, model_.spec, nullptr);
  const FeatureInput features(graph_.features());
  DenseMatrix sgc_x;
  if (model_.spec.arch == Arch::sgc) sgc_x = sgc_propagate(features, prop);
  for (Index e = 0; e < epochs; ++e) {
    ForwardCache cache;
    const DenseMatrix logits = forward(model_, features, prop, &*dropout_rng_, &cache, &sgc_x);
    const auto lg = softmax_cross_entropy(logits, graph_.labels(), graph_.splits().train);
    if (!std::isfinite(lg.loss)) throw DivergenceError("proxy fine-tuning diverged");
    backward(model_, prop, cache, lg.grad);
    adam_->step(model_.params);
  }
}

PseudoLabels ProxyTrainer::pseudo_labels() const {
  if (model_.params.empty()) throw std::logic_error("ProxyTrainer::pseudo_labels called before fit");
  PseudoLabels out{softmax_rows(predict(model_, graph_))};
  out.validate();
  return out;
}

PseudoLabels train_proxy(const Graph& graph, const ProxyConfig& config, std::uint64_t seed) {
  ProxyTrainer trainer(graph, config, seed);
  trainer.fit();
  return trainer.pseudo_labels();
}

// --- mask -----------------------------------------------------------------------

namespace {

void check_simplex(std::span<const double> z, const char* which) {
  double total = 0.0;
  for (double v : z) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string(which) + " has a negative or NaN entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument(std::string(which) + " does not sum to 1");
}

}  // namespace

double homophily_strength(std::span<const double> zi, std::span<const double> zj) {
  if (zi.size() != zj.size()) throw ShapeError("homophily_strength: class count mismatch");
  check_simplex(zi, "z_i");
  check_simplex(zj, "z_j");
  double s = 0.0;
  for (std::size_t mu = 0; mu < zi.size(); ++mu) s += zi[mu] * zj[mu];
  return s;
}

HomophilyMask build_mask(const Graph& graph, const PseudoLabels& pseudo) {
  if (pseudo.num_nodes() != graph.num_nodes()) throw ShapeError("pseudo labels: row count != node count");
  pseudo.validate();
  const auto& a = graph.adjacency();
  std::vector<double> values(static_cast<std::size_t>(a.nnz()), 0.0);
  const Index c = pseudo.num_classes();
  const auto& z = pseudo.probs;
  const auto& offsets = a.row_offsets();
  const auto& cols = a.col_indices();
  for (Index i = 0; i < graph.num_nodes(); ++i) {
    for (Index k = offsets[i]; k < offsets[i + 1]; ++k) {
      const Index j = cols[k];
      if (j < i) continue;
      double s = 0.0;
      for (Index mu = 0; mu < c; ++mu) s += z(i, mu) * z(j, mu);
      values[k] = s;
      // Mirror entry (j, i): locate i inside row j.
      const auto row_j = a.row_cols(j);
      const auto pos = std::lower_bound(row_j.begin(), row_j.end(), i) - row_j.begin();
      values[offsets[j] + pos] = s;
    }
  }
  return {a.with_values(std::move(values))};
}

void write_mask_tsv(const HomophilyMask& mask, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.imbue(std::locale::classic());
  out.precision(17);
  const auto& m = mask.mask;
  for (Index i = 0; i < m.rows(); ++i) {
    const auto cols = m.row_cols(i);
    const auto vals = m.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (cols[k] > i) out << i << '\t' << cols[k] << '\t' << vals[k] << '\n';
  }
}

std::optional<HomophilyMask> refresh_cycle(const Graph& graph, ProxyTrainer& proxy, Index epoch,
                                           const RefreshConfig& config) {
  if (config.period <= 0) return std::nullopt;
  if ((epoch + 1) % config.period != 0) return std::nullopt;
  proxy.finetune(config.finetune_epochs, config.lr);
  return build_mask(graph, proxy.pseudo_labels());
}

}  // namespace hes
