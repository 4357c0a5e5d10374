#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "hes/dataset.hpp"
#include "hes/models.hpp"
#include "support.hpp"

using namespace hes;
using namespace testing_support;

namespace {

ModelSpec spec_of(Arch arch, Index layers, Index hidden, Activation act = Activation::relu) {
  ModelSpec s;
  s.arch = arch;
  s.layers = layers;
  s.hidden = hidden;
  s.dropout = 0.0;
  s.activation = act;
  return s;
}

TrainedModel init(const ModelSpec& spec, const Graph& g, std::uint64_t seed) {
  Rng rng(seed);
  auto m = TrainedModel::initialize(spec, g.feature_dim(), g.num_classes(), rng);
  for (Index l = 0; l < m.weight_layers(); ++l)
    for (Index j = 0; j < m.bias(l).value.cols(); ++j) m.bias(l).value(0, j) = 0.1 * rng.normal();
  return m;
}

DenseMatrix logits_of(const TrainedModel& m, const Graph& g, const Propagation& prop) {
  const FeatureInput x(g.features());
  if (m.spec.arch == Arch::sgc) {
    const auto xs = sgc_propagate(x, prop);
    return forward(m, x, prop, nullptr, nullptr, &xs);
  }
  return forward(m, x, prop);
}

double loss_of(const TrainedModel& m, const Graph& g, const Propagation& prop, std::span<const NodeId> nodes) {
  return softmax_cross_entropy(logits_of(m, g, prop), g.labels(), nodes).loss;
}

std::vector<NodeId> all_nodes(const Graph& g) {
  std::vector<NodeId> v(g.num_nodes());
  for (Index i = 0; i < g.num_nodes(); ++i) v[i] = i;
  return v;
}

Graph two_cliques() {
  std::vector<Edge> edges;
  for (Index c = 0; c < 2; ++c)
    for (Index i = 0; i < 6; ++i)
      for (Index j = i + 1; j < 6; ++j) edges.emplace_back(6 * c + i, 6 * c + j);
  DenseMatrix x = DenseMatrix::Zero(12, 3);
  std::vector<int> labels(12);
  for (Index v = 0; v < 12; ++v) {
    labels[v] = v < 6 ? 0 : 1;
    x(v, labels[v]) = 1.0;
    x(v, 2) = 0.1 * static_cast<double>(v % 3);
  }
  return Graph(12, 2, edges, x, labels, Splits{{0, 1, 6, 7}, {2, 3, 8, 9}, {4, 5, 10, 11}});
}

}  // namespace

TEST_CASE("spec validation and layer dims") {
  auto s = spec_of(Arch::gcn, 3, 16);
  CHECK(s.layer_dims(10, 4) == std::vector<std::pair<Index, Index>>{{10, 16}, {16, 16}, {16, 4}});
  CHECK(spec_of(Arch::sgc, 5, 16).layer_dims(10, 4) == std::vector<std::pair<Index, Index>>{{10, 4}});
  s.layers = 0;
  CHECK_THROWS(s.validate());
  s = spec_of(Arch::gcn, 2, 0);
  CHECK_THROWS(s.validate());
  s = spec_of(Arch::gcn, 2, 4);
  s.dropout = 1.0;
  CHECK_THROWS(s.validate());
  CHECK(parse_arch("sgc") == Arch::sgc);
  CHECK(to_string(Arch::mlp) == "mlp");
  CHECK_THROWS(parse_arch("gat"));
}

TEST_CASE("full-stack gradients match finite differences") {
  Rng rng(1);
  for (auto arch : {Arch::gcn, Arch::sgc, Arch::mlp}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto g = random_graph(rng, 6, 3, 0.5, 4);
      const auto spec = spec_of(arch, 1 + static_cast<Index>(rng.below(3)), 5);
      auto model = init(spec, g, rng.next_u64());
      ReceptiveFieldPlan plan = ReceptiveFieldPlan::full(6, spec.layers);
      for (auto& d : plan.stop_depth) d = 1 + static_cast<Index>(rng.below(spec.layers));
      const auto prop = make_propagation(g, spec, trial % 2 ? &plan : nullptr);
      const auto nodes = all_nodes(g);

      const FeatureInput x(g.features());
      ForwardCache cache;
      DenseMatrix xs;
      if (arch == Arch::sgc) xs = sgc_propagate(x, prop);
      const auto logits = forward(model, x, prop, nullptr, &cache, &xs);
      backward(model, prop, cache, softmax_cross_entropy(logits, g.labels(), nodes).grad);

      for (std::size_t p = 0; p < model.params.size(); ++p) {
        const auto numeric = numeric_gradient(
            [&](const DenseMatrix& v) {
              auto copy = model;
              copy.params[p].value = v;
              return loss_of(copy, g, prop, nodes);
            },
            model.params[p].value);
        CHECK_MESSAGE(relative_error(model.params[p].grad, numeric) <= 1e-4, to_string(arch), " param ", p);
      }
    }
  }
}

TEST_CASE("gradients through sparse feature input") {
  Rng rng(2);
  auto g = random_graph(rng, 6, 2, 0.5, 20);
  DenseMatrix x = DenseMatrix::Zero(6, 20);
  for (Index i = 0; i < 6; ++i) x(i, rng.below(20)) = 1.0;
  g = Graph(6, 2, g.edge_list(), x, g.labels());
  const FeatureInput in(g.features());
  CHECK(in.is_sparse());
  const auto spec = spec_of(Arch::gcn, 2, 4);
  auto model = init(spec, g, 3);
  const auto prop = make_propagation(g, spec, nullptr);
  ForwardCache cache;
  const auto logits = forward(model, in, prop, nullptr, &cache);
  CHECK((logits - forward(model, FeatureInput(g.features(), 0.0), prop)).cwiseAbs().maxCoeff() < 1e-14);
  const auto nodes = all_nodes(g);
  backward(model, prop, cache, softmax_cross_entropy(logits, g.labels(), nodes).grad);
  const auto numeric = numeric_gradient(
      [&](const DenseMatrix& v) {
        auto copy = model;
        copy.params[0].value = v;
        return loss_of(copy, g, prop, nodes);
      },
      model.params[0].value);
  CHECK(relative_error(model.params[0].grad, numeric) <= 1e-4);
}

TEST_CASE("full plan is bitwise identical to no plan") {
  Rng rng(3);
  for (auto arch : {Arch::gcn, Arch::sgc}) {
    const auto g = random_graph(rng, 30, 3, 0.1, 5);
    const auto spec = spec_of(arch, 3, 8);
    const auto model = init(spec, g, 4);
    const auto plan = ReceptiveFieldPlan::full(30, 3);
    CHECK(logits_of(model, g, make_propagation(g, spec, &plan)) == logits_of(model, g, make_propagation(g, spec, nullptr)));
  }
}

TEST_CASE("training with a full plan reproduces unplanned training") {
  Rng rng(8);
  const auto raw = random_graph(rng, 40, 3, 0.1, 5);
  const auto g = raw.with_splits(make_splits(raw, {0.5, 0.25, 0.25}, 9));
  auto spec = spec_of(Arch::gcn, 3, 8);
  spec.dropout = 0.5;
  TrainHyper hyper;
  hyper.max_epochs = 20;
  const auto plan = ReceptiveFieldPlan::full(40, 3);
  const auto a = train(g, spec, &plan, hyper, 11);
  const auto b = train(g, spec, nullptr, hyper, 11);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].train_loss == b.history[e].train_loss);
    CHECK(a.history[e].val_loss == b.history[e].val_loss);
  }
  CHECK(predict(a.model, g) == predict(b.model, g));
}

TEST_CASE("single node graph is a stacked linear model") {
  DenseMatrix x(1, 3);
  x << 0.5, -1.0, 2.0;
  const Graph g(1, 2, std::vector<Edge>{}, x, {0});
  const auto spec = spec_of(Arch::gcn, 2, 4);
  const auto m = init(spec, g, 5);
  const DenseMatrix h = (x * m.weight(0).value + m.bias(0).value).cwiseMax(0.0);
  const DenseMatrix expected = h * m.weight(1).value + m.bias(1).value;
  CHECK((logits_of(m, g, make_propagation(g, spec, nullptr)) - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("6-node toy: stopped node self-updates at layer 2") {
  // path 0-1-2-3-4-5
  Rng rng(6);
  const auto base = path_graph({0, 1, 0, 1, 0, 1});
  DenseMatrix x(6, 3);
  for (Index i = 0; i < 18; ++i) x.data()[i] = rng.normal();
  const Graph g(6, 2, base.edge_list(), x, base.labels());
  const auto spec = spec_of(Arch::gcn, 2, 4);
  const auto m = init(spec, g, 7);
  ReceptiveFieldPlan plan = ReceptiveFieldPlan::full(6, 2);
  plan.stop_depth[0] = 1;

  // Hand-rolled: A_hat = D^-1/2 (A + I) D^-1/2 on the path.
  DenseMatrix a = DenseMatrix::Identity(6, 6);
  for (Index i = 0; i + 1 < 6; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
  Eigen::VectorXd d(6);
  for (Index i = 0; i < 6; ++i) d(i) = 1.0 / std::sqrt(a.row(i).sum());
  const DenseMatrix ahat = d.asDiagonal() * a * d.asDiagonal();
  DenseMatrix z1 = ahat * (x * m.weight(0).value);
  z1.rowwise() += m.bias(0).value.row(0);
  const DenseMatrix h1 = z1.cwiseMax(0.0);
  const DenseMatrix hw = h1 * m.weight(1).value;
  DenseMatrix expected = ahat * hw;
  expected.row(0) = hw.row(0);
  expected.rowwise() += m.bias(1).value.row(0);

  const auto got = logits_of(m, g, make_propagation(g, spec, &plan));
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-13);
  // Only node 0's row differs from the unplanned output (its neighbours read
  // layer-1 embeddings, which are unchanged).
  const auto full = logits_of(m, g, make_propagation(g, spec, nullptr));
  CHECK(got.row(0) != full.row(0));
  for (Index i = 1; i < 6; ++i) CHECK(got.row(i) == full.row(i));
}

TEST_CASE("SGC equals identity-activation GCN") {
  Rng rng(8);
  const auto g = random_graph(rng, 15, 3, 0.2, 4);
  for (Index L : {1, 2, 3}) {
    const auto gspec = spec_of(Arch::gcn, L, 4, Activation::identity);
    auto gcn = init(gspec, g, 9);
    DenseMatrix w = DenseMatrix::Identity(4, 4);
    for (Index l = 0; l < L; ++l) {
      gcn.bias(l).value.setZero();
      w = w * gcn.weight(l).value;
    }
    const auto sspec = spec_of(Arch::sgc, L, 4);
    auto sgc = init(sspec, g, 10);
    sgc.weight(0).value = w;
    sgc.bias(0).value.setZero();
    const auto a = logits_of(gcn, g, make_propagation(g, gspec, nullptr));
    const auto b = logits_of(sgc, g, make_propagation(g, sspec, nullptr));
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("SGC loss is non-increasing under small-step gradient descent") {
  Rng rng(11);
  auto g = random_graph(rng, 40, 3, 0.1, 6);
  const auto spec = spec_of(Arch::sgc, 2, 8);
  auto model = init(spec, g, 12);
  const auto prop = make_propagation(g, spec, nullptr);
  const FeatureInput x(g.features());
  const auto xs = sgc_propagate(x, prop);
  const auto nodes = all_nodes(g);
  double prev = INFINITY;
  for (int step = 0; step < 300; ++step) {
    ForwardCache cache;
    const auto lg = softmax_cross_entropy(forward(model, x, prop, nullptr, &cache, &xs), g.labels(), nodes);
    REQUIRE(lg.loss <= prev + 1e-15);
    prev = lg.loss;
    backward(model, prop, cache, lg.grad);
    sgd_step(model.params, 0.05);
  }
}

TEST_CASE("training separates two cliques and is deterministic") {
  const auto g = two_cliques();
  ModelSpec spec = spec_of(Arch::gcn, 2, 8);
  spec.dropout = 0.5;
  TrainHyper hyper;
  hyper.max_epochs = 200;
  const auto a = train(g, spec, nullptr, hyper, 3);
  const auto b = train(g, spec, nullptr, hyper, 3);
  CHECK(a.test_acc == 1.0);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_loss == b.history[i].val_loss);
  }
  CHECK(evaluate(a.model, g, g.splits().test) == 1.0);
  CHECK_THROWS(evaluate(a.model, g, std::vector<NodeId>{}));
  // the reported snapshot is the minimum-validation-loss epoch
  double best = INFINITY;
  for (const auto& r : a.history) best = std::min(best, r.val_loss);
  CHECK(a.best_val_loss == best);
  CHECK(a.history[a.best_epoch].val_loss == best);
}

TEST_CASE("uniform logits predict class 0") {
  const DenseMatrix z = DenseMatrix::Zero(10, 3);
  const std::vector<int> labels{0, 1, 2, 0, 0, 1, 2, 2, 0, 1};
  std::vector<NodeId> nodes(10);
  for (Index i = 0; i < 10; ++i) nodes[i] = i;
  CHECK(accuracy(z, labels, nodes) == 0.4);
  DenseMatrix perfect = DenseMatrix::Zero(10, 3);
  for (Index i = 0; i < 10; ++i) perfect(i, labels[i]) = 1.0;
  CHECK(accuracy(perfect, labels, nodes) == 1.0);
}

TEST_CASE("MACs closed forms") {
  // N=4, 3 undirected edges, dims 4 -> 8 -> 2
  DenseMatrix x = DenseMatrix::Ones(4, 4);
  const Graph g(4, 2, std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}}, x, {0, 1, 0, 1});
  const auto spec = spec_of(Arch::gcn, 2, 8);
  const auto m = count_macs(spec, g, nullptr);
  CHECK(m.aggregation == std::vector<double>{40, 80});
  CHECK(m.transform == std::vector<double>{128, 64});
  CHECK(m.total == 312);
  CHECK(m.sparsity_percent == 0.0);

  ReceptiveFieldPlan stop_all = ReceptiveFieldPlan::full(4, 2);
  for (auto& d : stop_all.stop_depth) d = 1;
  const auto p = count_macs(spec, g, &stop_all);
  CHECK(p.aggregation[1] == 4 * 8);
  CHECK(p.total < m.total);
  CHECK(p.sparsity_percent == doctest::Approx(100.0 * 6.0 / 20.0));
}

TEST_CASE("pruned MACs never exceed unpruned, equality iff full") {
  Rng rng(13);
  for (int t = 0; t < 30; ++t) {
    const auto g = random_graph(rng, 25, 3, 0.15, 7);
    const Index L = 1 + static_cast<Index>(rng.below(5));
    for (auto arch : {Arch::gcn, Arch::sgc}) {
      const auto spec = spec_of(arch, L, 16);
      ReceptiveFieldPlan plan = ReceptiveFieldPlan::full(25, L);
      for (auto& d : plan.stop_depth) d = rng.uniform() < 0.2 ? 1 + static_cast<Index>(rng.below(L)) : L;
      const auto full = count_macs(spec, g, nullptr);
      const auto pruned = count_macs(spec, g, &plan);
      CHECK(pruned.total <= full.total);
      CHECK(pruned.sparsity_percent >= 0.0);
      CHECK(pruned.sparsity_percent <= 100.0);
      bool any_early = false;
      for (Index i = 0; i < 25; ++i)
        any_early |= plan.stop_depth[i] < L && g.degree(i) > 0;
      CHECK((pruned.total < full.total) == any_early);
    }
  }
}

TEST_CASE("checkpoint round trip") {
  Rng rng(14);
  const auto g = random_graph(rng, 10, 3, 0.3, 5);
  auto model = init(spec_of(Arch::gcn, 3, 6), g, 15);
  ReceptiveFieldPlan plan = ReceptiveFieldPlan::full(10, 3);
  plan.stop_depth[2] = 1;
  model.plan = plan;
  const auto dir = std::filesystem::temp_directory_path() / "hes_test_ckpt";
  std::filesystem::remove_all(dir);
  save_checkpoint(model, dir);
  const auto loaded = load_checkpoint(dir);
  CHECK(loaded.spec.layers == 3);
  CHECK(loaded.input_dim == 5);
  REQUIRE(loaded.params.size() == model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i) CHECK(loaded.params[i].value == model.params[i].value);
  CHECK(predict(loaded, g.with_splits({})) == predict(model, g));
}
