#include "hes/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "hes/rng.hpp"

namespace hes {

namespace fs = std::filesystem;
using nlohmann::json;

BundleError::BundleError(const fs::path& file, std::size_t line, const std::string& what)
    : std::runtime_error(file.string() + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
      file_(file),
      line_(line) {}

namespace {

std::ifstream open_in(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw BundleError(file, 0, "cannot open file");
  return in;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view text, T& value) {
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

json read_json(const fs::path& file) {
  auto in = open_in(file);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw BundleError(file, 0, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

BundleStats compute_stats(const Graph& graph, const std::string& name) {
  BundleStats s;
  s.name = name;
  s.num_nodes = graph.num_nodes();
  s.num_edges = graph.num_edges();
  s.num_classes = graph.num_classes();
  s.feature_dim = graph.feature_dim();
  s.isolated_nodes = graph.isolated_count();
  try {
    s.graph_homophily = graph_homophily(graph);
  } catch (const UndefinedHomophily&) {
    s.graph_homophily = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

LoadedBundle load_bundle(const fs::path& dir) {
  const auto meta_path = dir / "meta.json";
  const json meta = read_json(meta_path);
  std::string name;
  Index n = 0, c = 0, d = 0;
  try {
    name = meta.at("name").get<std::string>();
    n = meta.at("num_nodes").get<Index>();
    c = meta.at("num_classes").get<Index>();
    d = meta.at("feature_dim").get<Index>();
  } catch (const json::exception& e) {
    throw BundleError(meta_path, 0, std::string("missing or malformed field: ") + e.what());
  }
  if (n < 0 || c < 1 || d < 0) throw BundleError(meta_path, 0, "invalid counts");

  // edges
  const auto edges_path = dir / "edges.tsv";
  std::vector<Edge> edges;
  {
    auto in = open_in(edges_path);
    std::unordered_set<std::uint64_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      strip_cr(line);
      if (line.empty()) continue;
      const auto fields = split_tabs(line);
      Index u = 0, v = 0;
      if (fields.size() != 2 || !parse_number(fields[0], u) || !parse_number(fields[1], v))
        throw BundleError(edges_path, line_no, "expected \"src<TAB>dst\"");
      if (u < 0 || v < 0 || u >= n || v >= n) throw BundleError(edges_path, line_no, "node id out of range");
      if (u == v) throw BundleError(edges_path, line_no, "self-loop");
      const auto key = static_cast<std::uint64_t>(std::min(u, v)) * static_cast<std::uint64_t>(n) +
                       static_cast<std::uint64_t>(std::max(u, v));
      if (!seen.insert(key).second) throw BundleError(edges_path, line_no, "duplicate edge");
      edges.emplace_back(u, v);
    }
  }

  // features
  const auto feat_path = dir / "features.tsv";
  DenseMatrix features(n, d);
  {
    auto in = open_in(feat_path);
    std::string line;
    Index row = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      strip_cr(line);
      if (line.empty() && d > 0) continue;
      if (row >= n) throw BundleError(feat_path, line_no, "more feature rows than num_nodes");
      if (d > 0) {
        const auto fields = split_tabs(line);
        if (static_cast<Index>(fields.size()) != d)
          throw BundleError(feat_path, line_no,
                            "expected " + std::to_string(d) + " columns, got " + std::to_string(fields.size()));
        for (Index j = 0; j < d; ++j) {
          double v = 0.0;
          if (!parse_number(fields[j], v) || !std::isfinite(v))
            throw BundleError(feat_path, line_no, "bad real in column " + std::to_string(j + 1));
          features(row, j) = v;
        }
      }
      ++row;
    }
    if (row != n)
      throw BundleError(feat_path, line_no, "expected " + std::to_string(n) + " rows, got " + std::to_string(row));
  }

  // labels
  const auto labels_path = dir / "labels.tsv";
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  {
    auto in = open_in(labels_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      strip_cr(line);
      if (line.empty()) continue;
      const auto fields = split_tabs(line);
      Index node = 0;
      int label = 0;
      if (fields.size() != 2 || !parse_number(fields[0], node) || !parse_number(fields[1], label))
        throw BundleError(labels_path, line_no, "expected \"node<TAB>label\"");
      if (node < 0 || node >= n) throw BundleError(labels_path, line_no, "node id out of range");
      if (label < 0 || label >= c) throw BundleError(labels_path, line_no, "label out of range");
      if (labels[node] != -1) throw BundleError(labels_path, line_no, "duplicate label entry");
      labels[node] = label;
    }
    for (Index i = 0; i < n; ++i)
      if (labels[i] == -1) throw BundleError(labels_path, 0, "node " + std::to_string(i) + " has no label");
  }

  // splits
  const auto splits_path = dir / "splits.json";
  Splits splits;
  {
    const json js = read_json(splits_path);
    try {
      splits.train = js.at("train").get<std::vector<NodeId>>();
      splits.val = js.at("val").get<std::vector<NodeId>>();
      splits.test = js.at("test").get<std::vector<NodeId>>();
    } catch (const json::exception& e) {
      throw BundleError(splits_path, 0, std::string("missing or malformed split: ") + e.what());
    }
  }

  try {
    Graph graph(n, c, edges, std::move(features), std::move(labels), std::move(splits));
    auto stats = compute_stats(graph, name);
    return {std::move(graph), std::move(stats)};
  } catch (const std::invalid_argument& e) {
    throw BundleError(splits_path, 0, e.what());
  }
}

void write_bundle(const Graph& graph, const std::string& name, const fs::path& dir) {
  fs::create_directories(dir);
  auto open_out = [&](const char* file) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw BundleError(dir / file, 0, "cannot open for writing");
    return out;
  };
  {
    json meta = {{"name", name},
                 {"num_nodes", graph.num_nodes()},
                 {"num_classes", graph.num_classes()},
                 {"feature_dim", graph.feature_dim()}};
    open_out("meta.json") << meta.dump(2) << '\n';
  }
  {
    auto out = open_out("edges.tsv");
    for (const auto& [u, v] : graph.edge_list()) out << u << '\t' << v << '\n';
  }
  {
    auto out = open_out("features.tsv");
    const auto& x = graph.features();
    std::string line;
    for (Index i = 0; i < x.rows(); ++i) {
      line.clear();
      for (Index j = 0; j < x.cols(); ++j) {
        if (j) line += '\t';
        line += format_double(x(i, j));
      }
      line += '\n';
      out << line;
    }
  }
  {
    auto out = open_out("labels.tsv");
    for (Index i = 0; i < graph.num_nodes(); ++i) out << i << '\t' << graph.label(i) << '\n';
  }
  {
    const auto& s = graph.splits();
    json js = {{"train", s.train}, {"val", s.val}, {"test", s.test}};
    open_out("splits.json") << js.dump() << '\n';
  }
}

void SbmSpec::validate() const {
  if (clusters < 2) throw std::invalid_argument("SBM needs at least 2 clusters");
  if (cluster_size < 1) throw std::invalid_argument("SBM cluster size must be >= 1");
  if (!(p >= 0.0 && p <= 1.0) || !(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("SBM probabilities must lie in [0, 1]");
  if (q > p && !allow_q_above_p)
    throw std::invalid_argument("SBM requires q <= p (set allow_q_above_p for heterophilic graphs)");
  if (feature_dim < 0) throw std::invalid_argument("negative feature_dim");
}

namespace {

// Visits every index in [0, count) independently with probability prob, by
// geometric skipping; O(expected hits) draws.
template <class F>
void bernoulli_indices(Rng& rng, std::uint64_t count, double prob, F&& visit) {
  if (prob <= 0.0 || count == 0) return;
  if (prob >= 1.0) {
    for (std::uint64_t i = 0; i < count; ++i) visit(i);
    return;
  }
  const double log_q = std::log1p(-prob);
  std::uint64_t i = 0;
  while (true) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    const double skip = std::floor(std::log(u) / log_q);
    if (skip >= static_cast<double>(count - i)) return;
    i += static_cast<std::uint64_t>(skip);
    visit(i);
    if (++i >= count) return;
  }
}

}  // namespace

Graph generate_sbm(const SbmSpec& spec) {
  spec.validate();
  const Index k = spec.clusters;
  const Index m = spec.cluster_size;
  const Index n = k * m;
  Rng rng(spec.seed);
  std::vector<Edge> edges;

  for (Index c = 0; c < k; ++c) {
    const Index base = c * m;
    // Pair (a, b), a < b, within the block, enumerated row by row.
    const auto pairs = static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(m - 1) / 2;
    Index a = 0, row_start = 0;
    bernoulli_indices(rng, pairs, spec.p, [&](std::uint64_t idx) {
      auto i = static_cast<Index>(idx);
      while (i >= row_start + (m - 1 - a)) {
        row_start += m - 1 - a;
        ++a;
      }
      const Index b = a + 1 + (i - row_start);
      edges.emplace_back(base + a, base + b);
    });
  }
  for (Index c1 = 0; c1 < k; ++c1) {
    for (Index c2 = c1 + 1; c2 < k; ++c2) {
      const auto pairs = static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(m);
      bernoulli_indices(rng, pairs, spec.q, [&](std::uint64_t idx) {
        const auto a = static_cast<Index>(idx / static_cast<std::uint64_t>(m));
        const auto b = static_cast<Index>(idx % static_cast<std::uint64_t>(m));
        edges.emplace_back(c1 * m + a, c2 * m + b);
      });
    }
  }

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i / m);

  DenseMatrix features;
  if (spec.feature_dim == 0) {
    features = DenseMatrix::Ones(n, 1);
  } else {
    Rng feat_rng(derive_seed(spec.seed, 1));
    features.resize(n, spec.feature_dim);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < spec.feature_dim; ++j) features(i, j) = feat_rng.normal();
      features(i, labels[i] % spec.feature_dim) += spec.feature_signal;
    }
  }

  Graph graph(n, k, edges, std::move(features), std::move(labels));
  return graph.with_splits(make_splits(graph, {0.48, 0.32, 0.20}, derive_seed(spec.seed, 2)));
}

Splits make_splits(const Graph& graph, SplitFractions fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f >= 0.0)) throw std::invalid_argument("split fractions must be nonnegative");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  const Index n = graph.num_nodes();
  const auto n_train = static_cast<Index>(std::llround(fractions[0] * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<Index>(std::llround(fractions[1] * static_cast<double>(n))));

  Rng rng(seed);
  std::vector<std::vector<NodeId>> by_class(static_cast<std::size_t>(graph.num_classes()));
  for (Index i = 0; i < n; ++i) by_class[graph.label(i)].push_back(i);
  const bool stratify = std::all_of(by_class.begin(), by_class.end(),
                                    [](const auto& members) { return members.empty() || members.size() >= 3; });

  std::vector<NodeId> order;
  order.reserve(static_cast<std::size_t>(n));
  if (stratify) {
    // Shuffle within each class, then interleave classes by within-class
    // rank quantile so any prefix of the order is label-proportional.
    struct Keyed {
      double quantile;
      int label;
      NodeId node;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(static_cast<std::size_t>(n));
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      auto& members = by_class[c];
      rng.shuffle(std::span<NodeId>(members));
      const auto size = static_cast<double>(members.size());
      for (std::size_t r = 0; r < members.size(); ++r)
        keyed.push_back({(static_cast<double>(r) + 0.5) / size, static_cast<int>(c), members[r]});
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
      return a.quantile != b.quantile ? a.quantile < b.quantile : a.label < b.label;
    });
    for (const auto& k : keyed) order.push_back(k.node);
  } else {
    std::cerr << "warning: a class has fewer than 3 nodes; using an unstratified split\n";
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), NodeId{0});
    rng.shuffle(std::span<NodeId>(order));
  }

  Splits s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace hes
