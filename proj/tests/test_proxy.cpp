#include <doctest.h>

#include <cmath>
#include <fstream>

#include "hes/dataset.hpp"
#include "hes/nn.hpp"
#include "hes/proxy.hpp"
#include "support.hpp"

using namespace hes;
using namespace testing_support;

namespace {

// Two 5-cliques joined by one bridge; features separate the cliques.
Graph two_cliques(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (Index c = 0; c < 2; ++c)
    for (Index i = 0; i < 5; ++i)
      for (Index j = i + 1; j < 5; ++j) edges.emplace_back(5 * c + i, 5 * c + j);
  edges.emplace_back(4, 5);
  DenseMatrix x(10, 4);
  std::vector<int> labels(10);
  for (Index v = 0; v < 10; ++v) {
    labels[v] = v < 5 ? 0 : 1;
    for (Index j = 0; j < 4; ++j) x(v, j) = 0.1 * rng.normal();
    x(v, labels[v]) += 2.0;
  }
  Splits s{{0, 1, 2, 5, 6, 7}, {3, 8}, {4, 9}};
  return Graph(10, 2, edges, std::move(x), std::move(labels), std::move(s));
}

PseudoLabels one_hot(const Graph& g) {
  DenseMatrix z = DenseMatrix::Zero(g.num_nodes(), g.num_classes());
  for (Index v = 0; v < g.num_nodes(); ++v) z(v, g.label(v)) = 1.0;
  return {z};
}

Graph heterophilic_sbm(std::uint64_t seed) {
  SbmSpec s;
  s.clusters = 3;
  s.cluster_size = 30;
  s.p = 0.05;
  s.q = 0.12;
  s.allow_q_above_p = true;
  s.feature_dim = 8;
  s.feature_signal = 1.5;
  s.seed = seed;
  return generate_sbm(s);
}

ProxyConfig quick_config(ProxyArch arch = ProxyArch::mlp3) {
  ProxyConfig c;
  c.arch = arch;
  c.hidden = 16;
  c.hyper.max_epochs = 200;
  return c;
}

}  // namespace

TEST_CASE("homophily_strength examples") {
  const std::vector<double> a{1, 0, 0}, b{0, 1, 0}, u{1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(homophily_strength(a, a) == 1.0);
  CHECK(homophily_strength(a, b) == 0.0);
  CHECK(homophily_strength(u, u) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const std::vector<double> p{0.2, 0.8}, q{0.6, 0.4};
  CHECK(homophily_strength(p, q) == doctest::Approx(0.44).epsilon(1e-15));
  const std::vector<double> bad{0.5, 0.6}, neg{1.5, -0.5};
  CHECK_THROWS_AS(homophily_strength(bad, q), std::invalid_argument);
  CHECK_THROWS_AS(homophily_strength(neg, q), std::invalid_argument);
  CHECK_THROWS_AS(homophily_strength(a, p), std::invalid_argument);
}

TEST_CASE("build_mask examples") {
  Rng rng(1);
  const auto g = random_graph(rng, 30, 3, 0.15);
  SUBCASE("identical one-hot rows") {
    DenseMatrix z = DenseMatrix::Zero(30, 3);
    z.col(1).setOnes();
    const auto m = build_mask(g, {z});
    for (double v : m.mask.values()) CHECK(v == 1.0);
  }
  SUBCASE("uniform rows") {
    const auto m = build_mask(g, {DenseMatrix::Constant(30, 3, 1.0 / 3)});
    for (double v : m.mask.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
  SUBCASE("true labels give edge homophily") {
    const auto m = build_mask(g, one_hot(g));
    for (Index i = 0; i < 30; ++i)
      for (Index j : g.neighbors(i)) CHECK(m.mask.at(i, j) == (g.label(i) == g.label(j) ? 1.0 : 0.0));
    Index same = 0;
    for (auto [a, b] : g.edge_list()) same += g.label(a) == g.label(b);
    CHECK(m.mean_strength() == doctest::Approx(double(same) / double(g.num_edges())).epsilon(1e-15));
    CHECK(m.mean_strength() == doctest::Approx(edge_homophily(g)).epsilon(1e-15));
  }
  CHECK_THROWS(build_mask(g, {DenseMatrix::Constant(29, 3, 1.0 / 3)}));
}

TEST_CASE("mask is symmetric bitwise, in [0,1], on the adjacency pattern") {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const auto g = random_graph(rng, 40, 4, 0.1);
    DenseMatrix z(40, 4);
    for (Index i = 0; i < 40; ++i)
      for (Index j = 0; j < 4; ++j) z(i, j) = rng.uniform() + 1e-3;
    z = softmax_rows(z * 5.0);
    const auto m = build_mask(g, {z});
    CHECK(m.mask.same_pattern(g.adjacency()));
    const DenseMatrix d = m.mask.to_dense();
    CHECK(d == d.transpose());
    CHECK(d.minCoeff() >= 0.0);
    CHECK(d.maxCoeff() <= 1.0);
  }
}

TEST_CASE("pseudo labels validation") {
  PseudoLabels ok{DenseMatrix::Constant(2, 2, 0.5)};
  CHECK_NOTHROW(ok.validate());
  PseudoLabels bad{DenseMatrix::Constant(2, 2, 0.6)};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("mlp3 proxy separates two cliques") {
  const auto g = two_cliques(3);
  ProxyConfig c = quick_config();
  c.dropout = 0.0;
  ProxyTrainer trainer(g, c, 0);
  const auto& fit = trainer.fit();
  const auto z = trainer.pseudo_labels();
  z.validate();
  CHECK(fit.history.back().train_acc == 1.0);
  for (Index v = 0; v < 10; ++v) CHECK(z.probs(v, g.label(v)) > 0.9);
}

TEST_CASE("proxy training is deterministic per seed, for every architecture") {
  const auto g = heterophilic_sbm(4);
  for (auto arch : {ProxyArch::mlp3, ProxyArch::gcn4, ProxyArch::sgc3}) {
    const auto a = train_proxy(g, quick_config(arch), 7);
    const auto b = train_proxy(g, quick_config(arch), 7);
    CHECK(a.probs == b.probs);
    a.validate();
    CHECK(a.num_nodes() == g.num_nodes());
  }
  CHECK(proxy_model_spec(ProxyArch::mlp3).layers == 3);
  CHECK(proxy_model_spec(ProxyArch::gcn4).layers == 4);
  CHECK(proxy_model_spec(ProxyArch::sgc3).layers == 3);
  CHECK(parse_proxy_arch("gcn4") == ProxyArch::gcn4);
  CHECK_THROWS(parse_proxy_arch("gat3"));
}

TEST_CASE("proxy needs training nodes") {
  const auto g = heterophilic_sbm(1).with_splits(Splits{{}, {0, 1}, {2}});
  CHECK_THROWS(train_proxy(g, quick_config(), 0));
}

TEST_CASE("refresh cycle") {
  const auto g = heterophilic_sbm(5);
  ProxyTrainer base(g, quick_config(), 1);
  base.fit();
  const auto initial = build_mask(g, base.pseudo_labels());

  SUBCASE("disabled never fires") {
    ProxyTrainer t = base;
    for (Index e = 0; e < 100; ++e) CHECK(!refresh_cycle(g, t, e, RefreshConfig{0}));
    CHECK(build_mask(g, t.pseudo_labels()).mask == initial.mask);
  }
  SUBCASE("fires on the period and changes the mask") {
    ProxyTrainer t = base;
    std::optional<HomophilyMask> last;
    int fired = 0;
    for (Index e = 0; e < 150; ++e)
      if (auto m = refresh_cycle(g, t, e, RefreshConfig{50, 10, 0.01})) {
        ++fired;
        last = m;
      }
    CHECK(fired == 3);
    REQUIRE(last);
    CHECK((last->mask.to_dense() - initial.mask.to_dense()).norm() > 0.0);
  }
  SUBCASE("zero learning rate is equivalent to disabled") {
    ProxyTrainer t = base;
    for (Index e = 0; e < 5; ++e) {
      const auto m = refresh_cycle(g, t, e, RefreshConfig{1, 10, 0.0});
      REQUIRE(m);
      CHECK(m->mask == initial.mask);
    }
  }
}

TEST_CASE("mask TSV export") {
  const auto g = path_graph({0, 1, 0});
  const auto m = build_mask(g, one_hot(g));
  const auto file = std::filesystem::temp_directory_path() / "hes_test_mask.tsv";
  write_mask_tsv(m, file);
  std::ifstream in(file);
  std::string all((std::istreambuf_iterator<char>(in)), {});
  CHECK(all == "0\t1\t0\n1\t2\t0\n");
}
