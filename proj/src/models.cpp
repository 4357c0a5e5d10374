#include "hes/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hes {

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::mlp: return "mlp";
    case Arch::gcn: return "gcn";
    case Arch::sgc: return "sgc";
  }
  return "?";
}

Arch parse_arch(const std::string& text) {
  if (text == "mlp") return Arch::mlp;
  if (text == "gcn") return Arch::gcn;
  if (text == "sgc") return Arch::sgc;
  throw std::invalid_argument("unknown architecture '" + text + "' (expected mlp, gcn or sgc)");
}

void ModelSpec::validate() const {
  if (layers < 1) throw std::invalid_argument("model needs at least one layer");
  if (hidden < 1) throw std::invalid_argument("hidden width must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
}

std::vector<std::pair<Index, Index>> ModelSpec::layer_dims(Index input_dim, Index num_classes) const {
  validate();
  if (arch == Arch::sgc) return {{input_dim, num_classes}};
  std::vector<std::pair<Index, Index>> dims;
  Index in = input_dim;
  for (Index l = 0; l < layers; ++l) {
    const Index out = l + 1 == layers ? num_classes : hidden;
    dims.emplace_back(in, out);
    in = out;
  }
  return dims;
}

// --- features -------------------------------------------------------------------

FeatureInput::FeatureInput(const DenseMatrix& features, double sparse_density_cutoff) {
  const Index nonzero = (features.array() != 0.0).count();
  const double density = features.size() ? static_cast<double>(nonzero) / static_cast<double>(features.size()) : 1.0;
  if (density < sparse_density_cutoff)
    sparse_ = SparseMatrix::from_dense(features);
  else
    dense_ = features;
}

FeatureInput::FeatureInput(SparseMatrix features) : sparse_(std::move(features)) {}

Index FeatureInput::rows() const { return sparse_ ? sparse_->rows() : dense_.rows(); }
Index FeatureInput::cols() const { return sparse_ ? sparse_->cols() : dense_.cols(); }

// --- propagation ------------------------------------------------------------------

SparseMatrix masked_propagation(const SparseMatrix& base, std::span<const std::uint8_t> active) {
  if (static_cast<Index>(active.size()) != base.rows() || base.rows() != base.cols())
    throw ShapeError("masked_propagation: mask size mismatch");
  std::vector<Index> offsets(static_cast<std::size_t>(base.rows()) + 1, 0);
  std::vector<Index> cols;
  std::vector<double> values;
  cols.reserve(static_cast<std::size_t>(base.nnz()));
  values.reserve(static_cast<std::size_t>(base.nnz()));
  for (Index i = 0; i < base.rows(); ++i) {
    if (active[i]) {
      const auto rc = base.row_cols(i);
      const auto rv = base.row_values(i);
      cols.insert(cols.end(), rc.begin(), rc.end());
      values.insert(values.end(), rv.begin(), rv.end());
    } else {
      cols.push_back(i);
      values.push_back(1.0);
    }
    offsets[i + 1] = static_cast<Index>(cols.size());
  }
  return SparseMatrix(base.rows(), base.cols(), std::move(offsets), std::move(cols), std::move(values));
}

Propagation::Propagation(std::shared_ptr<const SparseMatrix> base, Index layers) {
  auto base_t = std::make_shared<const SparseMatrix>(base->transposed());
  forward_.assign(static_cast<std::size_t>(layers), base);
  backward_.assign(static_cast<std::size_t>(layers), base_t);
}

Propagation::Propagation(std::shared_ptr<const SparseMatrix> base, const ReceptiveFieldPlan& plan) {
  const auto masks = layer_aggregation_masks(plan, plan.layers);
  if (plan.num_nodes() != base->rows()) throw ShapeError("plan node count != graph node count");
  auto base_t = std::make_shared<const SparseMatrix>(base->transposed());
  std::shared_ptr<const SparseMatrix> prev_f, prev_b;
  const std::vector<std::uint8_t>* prev_mask = nullptr;
  for (const auto& mask : masks) {
    const bool all_active = std::all_of(mask.begin(), mask.end(), [](auto a) { return a != 0; });
    if (all_active) {
      forward_.push_back(base);
      backward_.push_back(base_t);
    } else if (prev_mask && *prev_mask == mask) {
      forward_.push_back(prev_f);
      backward_.push_back(prev_b);
    } else {
      auto f = std::make_shared<const SparseMatrix>(masked_propagation(*base, mask));
      forward_.push_back(f);
      backward_.push_back(std::make_shared<const SparseMatrix>(f->transposed()));
    }
    prev_f = forward_.back();
    prev_b = backward_.back();
    prev_mask = &mask;
  }
}

std::shared_ptr<const SparseMatrix> gcn_operator(const Graph& graph) {
  return std::make_shared<const SparseMatrix>(normalized_adjacency(graph, NormMode::symmetric, true));
}

Propagation make_propagation(const Graph& graph, const ModelSpec& spec, const ReceptiveFieldPlan* plan) {
  auto base = gcn_operator(graph);
  const Index hops = spec.arch == Arch::mlp ? 0 : spec.layers;
  if (plan && spec.arch != Arch::mlp) {
    if (plan->layers != hops)
      throw std::invalid_argument("plan has " + std::to_string(plan->layers) + " layers, model has " +
                                  std::to_string(hops));
    return Propagation(base, *plan);
  }
  return Propagation(base, hops);
}

// --- model -----------------------------------------------------------------------

TrainedModel TrainedModel::initialize(const ModelSpec& spec, Index input_dim, Index num_classes, Rng& rng) {
  TrainedModel m;
  m.spec = spec;
  m.input_dim = input_dim;
  m.num_classes = num_classes;
  for (const auto& [in, out] : spec.layer_dims(input_dim, num_classes)) {
    m.params.push_back({glorot_uniform(in, out, rng), DenseMatrix::Zero(in, out), 0.0});
    m.params.push_back({DenseMatrix::Zero(1, out), DenseMatrix::Zero(1, out), 0.0});
  }
  return m;
}

namespace {

SparseMatrix sparse_dropout(const SparseMatrix& x, double p, Rng& rng, DropoutMask& mask) {
  std::vector<double> vals = x.values();
  if (p == 0.0) {
    mask.keep_scale.resize(0, 0);
    return x;
  }
  const double scale = 1.0 / (1.0 - p);
  mask.keep_scale.resize(1, static_cast<Index>(vals.size()));
  for (std::size_t k = 0; k < vals.size(); ++k) {
    const double s = rng.uniform() < p ? 0.0 : scale;
    mask.keep_scale(0, static_cast<Index>(k)) = s;
    vals[k] *= s;
  }
  return x.with_values(std::move(vals));
}

DenseMatrix activate(const DenseMatrix& pre, Activation act) {
  return act == Activation::relu ? relu_forward(pre) : pre;
}

}  // namespace

DenseMatrix sgc_propagate(const FeatureInput& features, const Propagation& prop) {
  DenseMatrix h;
  if (features.is_sparse())
    h = features.sparse().to_dense();
  else
    h = features.dense();
  for (Index l = 0; l < prop.layers(); ++l) h = spmm(prop.forward(l), h);
  return h;
}

DenseMatrix forward(const TrainedModel& model, const FeatureInput& features, const Propagation& prop, Rng* rng,
                    ForwardCache* cache, const DenseMatrix* sgc_features) {
  const auto& spec = model.spec;
  const Index layers = model.weight_layers();
  const bool training = rng != nullptr && spec.dropout > 0.0;
  if (spec.arch == Arch::gcn && prop.layers() != layers)
    throw ShapeError("propagation depth does not match GCN depth");
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.inputs.resize(static_cast<std::size_t>(layers));
  c.pre_activations.resize(static_cast<std::size_t>(layers));
  c.dropout.resize(static_cast<std::size_t>(layers));

  DenseMatrix h;
  for (Index l = 0; l < layers; ++l) {
    const auto& w = model.weight(l).value;
    const auto b = model.bias(l).value.row(0);
    DenseMatrix z;
    if (l == 0 && spec.arch == Arch::sgc) {
      if (!sgc_features) throw std::invalid_argument("SGC forward needs propagated features");
      if (sgc_features->cols() != w.rows()) throw ShapeError("SGC feature width mismatch");
      c.inputs[0] = training ? dropout_forward(*sgc_features, spec.dropout, *rng, c.dropout[0]) : *sgc_features;
      z = c.inputs[0] * w;
    } else if (l == 0 && features.is_sparse()) {
      if (features.cols() != w.rows()) throw ShapeError("feature width mismatch");
      c.sparse_input = training ? sparse_dropout(features.sparse(), spec.dropout, *rng, c.dropout[0]) : features.sparse();
      z = spmm(*c.sparse_input, w);
    } else {
      const DenseMatrix& in = l == 0 ? features.dense() : h;
      if (in.cols() != w.rows()) throw ShapeError("layer input width mismatch");
      c.inputs[l] = training ? dropout_forward(in, spec.dropout, *rng, c.dropout[l]) : in;
      z = c.inputs[l] * w;
    }
    if (spec.arch == Arch::gcn) z = spmm(prop.forward(l), z);
    z.rowwise() += b;
    if (l + 1 < layers) {
      h = activate(z, spec.activation);
      c.pre_activations[l] = std::move(z);
    } else {
      c.logits = std::move(z);
    }
  }
  return c.logits;
}

void backward(TrainedModel& model, const Propagation& prop, const ForwardCache& cache, const DenseMatrix& grad_logits) {
  const auto& spec = model.spec;
  const Index layers = model.weight_layers();
  DenseMatrix grad = grad_logits;
  for (Index l = layers - 1; l >= 0; --l) {
    if (l + 1 < layers && spec.activation == Activation::relu) grad = relu_backward(cache.pre_activations[l], grad);
    model.bias(l).grad = grad.colwise().sum();
    DenseMatrix dz = spec.arch == Arch::gcn ? spmm(prop.backward(l), grad) : std::move(grad);
    const auto& w = model.weight(l).value;
    if (l == 0 && cache.sparse_input) {
      model.weight(l).grad = spmm_transposed(*cache.sparse_input, dz);
    } else {
      model.weight(l).grad.noalias() = cache.inputs[l].transpose() * dz;
    }
    if (l > 0) {
      DenseMatrix din = dz * w.transpose();
      grad = dropout_backward(cache.dropout[l], din);
    }
  }
}

DenseMatrix predict(const TrainedModel& model, const Graph& graph) {
  const auto prop = make_propagation(graph, model.spec, model.plan ? &*model.plan : nullptr);
  const FeatureInput x(graph.features());
  if (model.spec.arch == Arch::sgc) {
    const DenseMatrix xs = sgc_propagate(x, prop);
    return forward(model, x, prop, nullptr, nullptr, &xs);
  }
  return forward(model, x, prop);
}

double evaluate(const TrainedModel& model, const Graph& graph, std::span<const NodeId> split) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  return accuracy(predict(model, graph), graph.labels(), split);
}

// --- training ----------------------------------------------------------------------

TrainResult train(const Graph& graph, const ModelSpec& spec, const ReceptiveFieldPlan* plan, const TrainHyper& hyper,
                  std::uint64_t seed, const PlanHook& hook) {
  spec.validate();
  const auto& splits = graph.splits();
  if (splits.train.empty()) throw std::invalid_argument("train: empty training split");
  if (splits.val.empty()) throw std::invalid_argument("train: empty validation split");
  if (hyper.max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");

  Rng init_rng(derive_seed(seed, 101));
  Rng dropout_rng(derive_seed(seed, 102));
  TrainedModel model = TrainedModel::initialize(spec, graph.feature_dim(), graph.num_classes(), init_rng);
  model.weight(0).weight_decay = hyper.weight_decay;
  if (plan) model.plan = *plan;

  const FeatureInput features(graph.features());
  auto base = gcn_operator(graph);
  auto build = [&](const std::optional<ReceptiveFieldPlan>& p) {
    const Index hops = spec.arch == Arch::mlp ? 0 : spec.layers;
    if (p && spec.arch != Arch::mlp) return Propagation(base, *p);
    return Propagation(base, hops);
  };
  Propagation prop = build(model.plan);
  DenseMatrix sgc_x;
  if (spec.arch == Arch::sgc) sgc_x = sgc_propagate(features, prop);

  AdamState adam(hyper.adam);
  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  result.model = model;
  Index since_best = 0;
  const auto& labels = graph.labels();

  for (Index epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    ForwardCache cache;
    const DenseMatrix logits = forward(model, features, prop, &dropout_rng, &cache, &sgc_x);
    auto lg = softmax_cross_entropy(logits, labels, splits.train);
    if (!std::isfinite(lg.loss))
      throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
    backward(model, prop, cache, lg.grad);
    adam.step(model.params);

    const DenseMatrix eval_logits = forward(model, features, prop, nullptr, nullptr, &sgc_x);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = lg.loss;
    rec.val_loss = softmax_cross_entropy(eval_logits, labels, splits.val).loss;
    rec.train_acc = accuracy(eval_logits, labels, splits.train);
    rec.val_acc = accuracy(eval_logits, labels, splits.val);
    rec.test_acc = splits.test.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : accuracy(eval_logits, labels, splits.test);
    if (!std::isfinite(rec.val_loss))
      throw DivergenceError("validation loss became non-finite at epoch " + std::to_string(epoch));
    result.history.push_back(rec);

    // Snapshot selection looks at validation loss only.
    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.val_acc = rec.val_acc;
      result.test_acc = rec.test_acc;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= hyper.patience) {
      break;
    }

    if (hook) {
      if (auto next = hook(epoch, model)) {
        model.plan = std::move(*next);
        prop = build(model.plan);
        if (spec.arch == Arch::sgc) sgc_x = sgc_propagate(features, prop);
      }
    }
  }
  for (auto& p : result.model.params) p.grad.setZero();
  return result;
}

// --- accounting ----------------------------------------------------------------------

MacsReport count_macs(const ModelSpec& spec, const Graph& graph, const ReceptiveFieldPlan* plan) {
  const auto dims = spec.layer_dims(graph.feature_dim(), graph.num_classes());
  const auto n = static_cast<double>(graph.num_nodes());
  const double slots_per_layer = static_cast<double>(graph.adjacency().nnz()) + n;
  MacsReport r;
  const Index hops = spec.arch == Arch::mlp ? 0 : spec.layers;
  std::vector<std::vector<std::uint8_t>> masks;
  if (plan && hops > 0) masks = layer_aggregation_masks(*plan, hops);

  for (Index l = 0; l < hops; ++l) {
    double active = slots_per_layer;
    if (!masks.empty()) {
      active = n;
      for (Index i = 0; i < graph.num_nodes(); ++i)
        if (masks[l][i]) active += static_cast<double>(graph.degree(i));
    }
    const double d_in = spec.arch == Arch::sgc ? static_cast<double>(graph.feature_dim())
                                               : static_cast<double>(dims[l].first);
    r.aggregation.push_back(active * d_in);
    r.active_slots += active;
    r.total_slots += slots_per_layer;
  }
  for (const auto& [in, out] : dims) r.transform.push_back(n * static_cast<double>(in) * static_cast<double>(out));
  for (double v : r.aggregation) r.total += v;
  for (double v : r.transform) r.total += v;
  r.sparsity_percent = r.total_slots > 0.0 ? 100.0 * (1.0 - r.active_slots / r.total_slots) : 0.0;
  return r;
}

// --- checkpoints -----------------------------------------------------------------------

namespace {

void write_matrix(const DenseMatrix& m, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << '\t';
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m(i, j));
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

DenseMatrix read_matrix(const std::filesystem::path& file, Index rows, Index cols) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  DenseMatrix m(rows, cols);
  std::string line;
  for (Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error(file.string() + ": too few rows");
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (Index j = 0; j < cols; ++j) {
      const auto [ptr, ec] = std::from_chars(p, end, m(i, j));
      if (ec != std::errc()) throw std::runtime_error(file.string() + ": bad value at row " + std::to_string(i + 1));
      p = ptr;
      if (j + 1 < cols) {
        if (p == end || *p != '\t') throw std::runtime_error(file.string() + ": too few columns");
        ++p;
      }
    }
  }
  return m;
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json js = {{"arch", to_string(model.spec.arch)},
                       {"layers", model.spec.layers},
                       {"hidden", model.spec.hidden},
                       {"dropout", model.spec.dropout},
                       {"activation", model.spec.activation == Activation::relu ? "relu" : "identity"},
                       {"input_dim", model.input_dim},
                       {"num_classes", model.num_classes}};
  if (model.plan) {
    const auto& p = *model.plan;
    js["plan"] = {{"layers", p.layers},     {"rule", p.rule},       {"threshold", p.threshold},
                  {"stop_depth", p.stop_depth}, {"flagged", p.flagged}, {"explicit_masks", p.explicit_masks}};
  } else {
    js["plan"] = nullptr;
  }
  std::ofstream(dir / "spec.json", std::ios::binary) << js.dump(2) << '\n';
  for (Index l = 0; l < model.weight_layers(); ++l) {
    write_matrix(model.weight(l).value, dir / ("layer_" + std::to_string(l) + "_weight.tsv"));
    write_matrix(model.bias(l).value, dir / ("layer_" + std::to_string(l) + "_bias.tsv"));
  }
}

TrainedModel load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "spec.json");
  if (!in) throw std::runtime_error("cannot read " + (dir / "spec.json").string());
  const auto js = nlohmann::json::parse(in);
  ModelSpec spec;
  spec.arch = parse_arch(js.at("arch").get<std::string>());
  spec.layers = js.at("layers").get<Index>();
  spec.hidden = js.at("hidden").get<Index>();
  spec.dropout = js.at("dropout").get<double>();
  spec.activation = js.at("activation").get<std::string>() == "identity" ? Activation::identity : Activation::relu;
  TrainedModel m;
  m.spec = spec;
  m.input_dim = js.at("input_dim").get<Index>();
  m.num_classes = js.at("num_classes").get<Index>();
  if (js.contains("plan") && !js["plan"].is_null()) {
    const auto& pj = js["plan"];
    ReceptiveFieldPlan p;
    p.layers = pj.at("layers").get<Index>();
    p.rule = pj.at("rule").get<std::string>();
    p.threshold = pj.at("threshold").get<double>();
    p.stop_depth = pj.at("stop_depth").get<std::vector<Index>>();
    p.flagged = pj.at("flagged").get<std::vector<std::uint8_t>>();
    p.explicit_masks = pj.at("explicit_masks").get<std::vector<std::vector<std::uint8_t>>>();
    p.validate();
    m.plan = std::move(p);
  }
  Index l = 0;
  for (const auto& [din, dout] : spec.layer_dims(m.input_dim, m.num_classes)) {
    auto w = read_matrix(dir / ("layer_" + std::to_string(l) + "_weight.tsv"), din, dout);
    auto b = read_matrix(dir / ("layer_" + std::to_string(l) + "_bias.tsv"), 1, dout);
    m.params.push_back({std::move(w), DenseMatrix::Zero(din, dout), 0.0});
    m.params.push_back({std::move(b), DenseMatrix::Zero(1, dout), 0.0});
    ++l;
  }
  return m;
}

}  // namespace hes
