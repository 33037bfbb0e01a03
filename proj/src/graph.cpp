#include "gp2f/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gp2f/error.hpp"
#include "gp2f/rng.hpp"

namespace gp2f {

Graph Graph::create(int num_nodes, std::vector<std::pair<int, int>> edges,
                    DenseMatrix features, std::vector<int> labels) {
  if (features.rows != num_nodes)
    throw ValidationError("graph: feature rows (" + std::to_string(features.rows) +
                          ") != num_nodes (" + std::to_string(num_nodes) + ")");
  require_finite(features, "graph features");

  std::vector<std::pair<int, int>> canon;
  canon.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes)
      throw ValidationError("graph: edge endpoint (" + std::to_string(a) + "," +
                            std::to_string(b) + ") out of range for N=" +
                            std::to_string(num_nodes));
    if (a == b) continue;  // self-loops only appear via normalization
    canon.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  Graph g;
  g.num_nodes = num_nodes;
  g.edges = std::move(canon);
  g.features = std::move(features);
  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != num_nodes)
      throw ValidationError("graph: label count != num_nodes");
    int maxc = 0;
    for (int y : labels) {
      if (y < 0) throw ValidationError("graph: negative class label");
      maxc = std::max(maxc, y);
    }
    g.num_classes = maxc + 1;
    g.labels = std::move(labels);
  }
  return g;
}

DenseMatrix Graph::adjacency_dense() const {
  DenseMatrix a(num_nodes, num_nodes);
  for (auto [i, j] : edges) {
    a.at(i, j) = 1.0;
    a.at(j, i) = 1.0;
  }
  return a;
}

std::vector<std::vector<int>> Graph::adjacency_lists() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes));
  for (auto [i, j] : edges) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  return adj;
}

NormalizedAdjacency normalize_adjacency(const Graph& g) {
  const int n = g.num_nodes;
  DenseMatrix a = g.adjacency_dense();
  for (int i = 0; i < n; ++i) a.at(i, i) = 1.0;  // A + I
  std::vector<double> dinv(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int j = 0; j < n; ++j) deg += a.at(i, j);
    dinv[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(deg);
  }
  DenseMatrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.at(i, j) = dinv[static_cast<std::size_t>(i)] * a.at(i, j) *
                     dinv[static_cast<std::size_t>(j)];
  return NormalizedAdjacency{std::move(out)};
}

namespace {

// The 90/10 partition is fixed per graph by a dedicated seed so every
// few-shot episode shares one test pool.
constexpr std::uint64_t kTestPoolSeed = 0;

std::pair<std::vector<int>, std::vector<int>> test_train_pools(const Graph& g) {
  std::vector<int> order(static_cast<std::size_t>(g.num_nodes));
  for (int i = 0; i < g.num_nodes; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng = Rng::derive(kTestPoolSeed, {Rng::tag("test-pool")});
  rng.shuffle(order);
  const auto ntest = static_cast<std::size_t>(g.num_nodes) * 9 / 10;
  std::vector<int> test(order.begin(), order.begin() + static_cast<long>(ntest));
  std::vector<int> pool(order.begin() + static_cast<long>(ntest), order.end());
  std::sort(test.begin(), test.end());
  std::sort(pool.begin(), pool.end());
  return {test, pool};
}

}  // namespace

FewShotSplit sample_few_shot(const Graph& g, int k, std::uint64_t seed) {
  if (!g.has_labels()) throw ProtocolError("few-shot sampling needs labels");
  if (k < 1) throw ProtocolError("few-shot k must be >= 1");
  auto [test, pool] = test_train_pools(g);

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(g.num_classes));
  for (int v : pool) by_class[static_cast<std::size_t>(g.labels[static_cast<std::size_t>(v)])].push_back(v);

  FewShotSplit split;
  split.k = k;
  split.seed = seed;
  split.test_idx = std::move(test);
  Rng rng = Rng::derive(seed, {Rng::tag("few-shot")});
  for (int c = 0; c < g.num_classes; ++c) {
    auto& cand = by_class[static_cast<std::size_t>(c)];
    if (static_cast<int>(cand.size()) < k)
      throw ProtocolError("class " + std::to_string(c) + " has only " +
                          std::to_string(cand.size()) + " candidates in the 10% pool, need k=" +
                          std::to_string(k));
    auto chosen = rng.sample_without_replacement(cand, static_cast<std::size_t>(k));
    split.train_idx.insert(split.train_idx.end(), chosen.begin(), chosen.end());
  }
  return split;
}

void SbmSpec::validate() const {
  if (blocks < 1 || nodes_per_block < 1)
    throw ValidationError("sbm spec: blocks and nodes_per_block must be >= 1");
  if (feature_dim < 1) throw ValidationError("sbm spec: feature_dim must be >= 1");
  if (!(p_out >= 0.0 && p_out <= p_in && p_in <= 1.0))
    throw ValidationError("sbm spec: need 0 <= p_out <= p_in <= 1, got p_in=" +
                          std::to_string(p_in) + " p_out=" + std::to_string(p_out));
  if (!(center_scale > 0.0)) throw ValidationError("sbm spec: center_scale must be > 0");
  if (noise_scale < 0.0) throw ValidationError("sbm spec: noise_scale must be >= 0");
  if (!feature_shift.empty() && static_cast<int>(feature_shift.size()) != feature_dim)
    throw ValidationError("sbm spec: feature_shift length != feature_dim");
}

namespace {

Graph generate_sbm(const SbmSpec& spec, const DenseMatrix& unit_centers, Rng& rng) {
  const int n = spec.blocks * spec.nodes_per_block;
  Rng edge_rng = rng.split();
  Rng noise_rng = rng.split();

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    const int bi = i / spec.nodes_per_block;
    for (int j = i + 1; j < n; ++j) {
      const int bj = j / spec.nodes_per_block;
      const double p = bi == bj ? spec.p_in : spec.p_out;
      if (edge_rng.next_bernoulli(p)) edges.emplace_back(i, j);
    }
  }

  DenseMatrix x(n, spec.feature_dim);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int b = i / spec.nodes_per_block;
    labels[static_cast<std::size_t>(i)] = b;
    for (int d = 0; d < spec.feature_dim; ++d) {
      double v = spec.center_scale * unit_centers.at(b, d) +
                 spec.noise_scale * noise_rng.next_normal();
      if (!spec.feature_shift.empty()) v += spec.feature_shift[static_cast<std::size_t>(d)];
      x.at(i, d) = v;
    }
  }
  return Graph::create(n, std::move(edges), std::move(x), std::move(labels));
}

}  // namespace

std::pair<Graph, Graph> generate_sbm_pair(const SbmSpec& source, const SbmSpec& target,
                                          std::uint64_t seed) {
  source.validate();
  target.validate();
  if (source.feature_dim != target.feature_dim)
    throw ValidationError("sbm pair: source/target feature_dim must match");
  const int blocks = std::max(source.blocks, target.blocks);

  // One shared set of unit center directions keeps the two domains
  // semantically aligned; each spec scales them by its own center_scale.
  Rng center_rng = Rng::derive(seed, {Rng::tag("sbm-centers")});
  DenseMatrix centers(blocks, source.feature_dim);
  for (auto& v : centers.data) v = center_rng.next_normal();

  Rng source_rng = Rng::derive(seed, {Rng::tag("sbm-source")});
  Rng target_rng = Rng::derive(seed, {Rng::tag("sbm-target")});
  Graph s = generate_sbm(source, centers, source_rng);
  Graph t = generate_sbm(target, centers, target_rng);
  return {std::move(s), std::move(t)};
}

Graph augment_view(const Graph& g, double p_edge_drop, double p_feat_mask,
                   std::uint64_t seed) {
  if (p_edge_drop < 0.0 || p_edge_drop > 1.0 || p_feat_mask < 0.0 || p_feat_mask > 1.0)
    throw ConfigError("augment_view: probabilities must lie in [0,1]");

  Rng edge_rng = Rng::derive(seed, {Rng::tag("aug-edges")});
  std::vector<std::pair<int, int>> kept;
  kept.reserve(g.edges.size());
  for (auto e : g.edges)
    if (!edge_rng.next_bernoulli(p_edge_drop)) kept.push_back(e);

  DenseMatrix x = g.features;
  Rng col_rng = Rng::derive(seed, {Rng::tag("aug-cols")});
  for (int d = 0; d < x.cols; ++d)
    if (col_rng.next_bernoulli(p_feat_mask))
      for (int i = 0; i < x.rows; ++i) x.at(i, d) = 0.0;

  return Graph::create(g.num_nodes, std::move(kept), std::move(x), g.labels);
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  // trailing blank lines are not nodes/edges
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

Graph load_graph(const std::string& features_path, const std::string& edges_path,
                 const std::optional<std::string>& labels_path) {
  auto feat_lines = read_lines(features_path);
  if (feat_lines.empty()) throw ParseError(features_path + ": no feature rows");

  std::vector<std::vector<double>> rows;
  rows.reserve(feat_lines.size());
  for (std::size_t ln = 0; ln < feat_lines.size(); ++ln) {
    std::istringstream ss(feat_lines[ln]);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof())
      throw ParseError(features_path + ":" + std::to_string(ln + 1) + ": malformed real value");
    if (row.empty())
      throw ParseError(features_path + ":" + std::to_string(ln + 1) + ": empty feature row");
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(features_path + ":" + std::to_string(ln + 1) +
                       ": inconsistent feature dimension");
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows.front().size());
  DenseMatrix x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x.at(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

  std::vector<std::pair<int, int>> edges;
  {
    auto edge_lines = read_lines(edges_path);
    for (std::size_t ln = 0; ln < edge_lines.size(); ++ln) {
      if (edge_lines[ln].empty()) continue;
      std::istringstream ss(edge_lines[ln]);
      long a, b;
      if (!(ss >> a >> b) || !(ss >> std::ws).eof())
        throw ParseError(edges_path + ":" + std::to_string(ln + 1) +
                         ": expected two integer node indices");
      if (a < 0 || b < 0 || a >= n || b >= n)
        throw ValidationError(edges_path + ":" + std::to_string(ln + 1) + ": endpoint (" +
                              std::to_string(a) + "," + std::to_string(b) +
                              ") out of range for N=" + std::to_string(n));
      edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
  }

  std::vector<int> labels;
  if (labels_path) {
    auto label_lines = read_lines(*labels_path);
    if (static_cast<int>(label_lines.size()) != n)
      throw ValidationError(*labels_path + ": label count " +
                            std::to_string(label_lines.size()) + " != N=" + std::to_string(n));
    for (std::size_t ln = 0; ln < label_lines.size(); ++ln) {
      std::istringstream ss(label_lines[ln]);
      long y;
      if (!(ss >> y) || !(ss >> std::ws).eof() || y < 0)
        throw ParseError(*labels_path + ":" + std::to_string(ln + 1) +
                         ": expected a non-negative integer class index");
      labels.push_back(static_cast<int>(y));
    }
  }
  return Graph::create(n, std::move(edges), std::move(x), std::move(labels));
}

void save_graph(const Graph& g, const std::string& features_path,
                const std::string& edges_path,
                const std::optional<std::string>& labels_path) {
  {
    std::ofstream out(features_path);
    if (!out) throw ValidationError("cannot write " + features_path);
    char buf[64];
    for (int i = 0; i < g.num_nodes; ++i) {
      for (int j = 0; j < g.features.cols; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", g.features.at(i, j));
        out << (j ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(edges_path);
    if (!out) throw ValidationError("cannot write " + edges_path);
    for (auto [i, j] : g.edges) out << i << ' ' << j << '\n';
  }
  if (labels_path) {
    std::ofstream out(*labels_path);
    if (!out) throw ValidationError("cannot write " + *labels_path);
    for (int y : g.labels) out << y << '\n';
  }
}

}  // namespace gp2f
