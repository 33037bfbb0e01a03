#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "gp2f/error.hpp"
#include "gp2f/graph.hpp"
#include "gp2f/rng.hpp"

using namespace gp2f;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path dir = fs::temp_directory_path() / "gp2f_graph_test";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p);
  out << content;
  return p;
}

Graph tiny_path_graph() {
  DenseMatrix x(3, 2);
  x.data = {1, 0, 0, 1, 1, 1};
  return Graph::create(3, {{0, 1}, {1, 2}}, std::move(x), {0, 1, 0});
}

// Direct reconstruction of D̃^{-1/2}(A+I)D̃^{-1/2} from first principles.
DenseMatrix brute_force_normalized(const Graph& g) {
  const int n = g.num_nodes;
  DenseMatrix a = g.adjacency_dense();
  for (int i = 0; i < n; ++i) a.at(i, i) += 1.0;
  DenseMatrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double di = 0.0, dj = 0.0;
      for (int t = 0; t < n; ++t) {
        di += a.at(i, t);
        dj += a.at(j, t);
      }
      out.at(i, j) = a.at(i, j) / std::sqrt(di) / std::sqrt(dj);
    }
  return out;
}

}  // namespace

TEST_CASE("load_graph reads the 3-node path fixture") {
  auto f = write_temp("f.txt", "1 0\n0 1\n1 1\n");
  auto e = write_temp("e.txt", "0 1\n1 2\n");
  auto l = write_temp("l.txt", "0\n1\n0\n");
  Graph g = load_graph(f.string(), e.string(), l.string());
  CHECK(g.num_nodes == 3);
  CHECK(g.edges.size() == 2);
  CHECK(g.feature_dim() == 2);
  CHECK(g.num_classes == 2);
  CHECK(g.labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("edge endpoint out of range is a validation error") {
  auto f = write_temp("f2.txt", "1 0\n0 1\n1 1\n");
  auto e = write_temp("e2.txt", "0 5\n");
  CHECK_THROWS_WITH_AS(load_graph(f.string(), e.string()), doctest::Contains("out of range"),
                       ValidationError);
}

TEST_CASE("duplicate and reversed edges collapse to one canonical edge") {
  auto f = write_temp("f3.txt", "1\n2\n3\n");
  auto e = write_temp("e3.txt", "0 1\n1 0\n0 1\n");
  Graph g = load_graph(f.string(), e.string());
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0] == std::pair<int, int>{0, 1});
}

TEST_CASE("input self-loops are not stored") {
  auto f = write_temp("f6.txt", "1\n2\n");
  auto e = write_temp("e6.txt", "0 0\n0 1\n1 1\n");
  Graph g = load_graph(f.string(), e.string());
  CHECK(g.edges == std::vector<std::pair<int, int>>{{0, 1}});
}

TEST_CASE("malformed lines name the file and line") {
  auto f = write_temp("f4.txt", "1 0\nnot-a-number 3\n");
  auto e = write_temp("e4.txt", "");
  CHECK_THROWS_WITH_AS(load_graph(f.string(), e.string()), doctest::Contains(":2"), ParseError);

  auto f5 = write_temp("f5.txt", "1 0\n0 1\n");
  auto e5 = write_temp("e5.txt", "0 1 2\n");
  CHECK_THROWS_WITH_AS(load_graph(f5.string(), e5.string()), doctest::Contains("e5.txt:1"),
                       ParseError);
}

TEST_CASE("save/load round trip preserves the graph") {
  Graph g = tiny_path_graph();
  fs::path dir = fs::temp_directory_path() / "gp2f_graph_test";
  fs::create_directories(dir);
  save_graph(g, (dir / "rf.txt").string(), (dir / "re.txt").string(), (dir / "rl.txt").string());
  Graph h = load_graph((dir / "rf.txt").string(), (dir / "re.txt").string(),
                       (dir / "rl.txt").string());
  CHECK(h.num_nodes == g.num_nodes);
  CHECK(h.edges == g.edges);
  CHECK(h.labels == g.labels);
  CHECK(h.features.data == g.features.data);
}

TEST_CASE("normalize_adjacency handles the spec'd small cases") {
  SUBCASE("edgeless graph is the identity") {
    Graph g = Graph::create(2, {}, DenseMatrix(2, 1));
    auto a = normalize_adjacency(g);
    CHECK(a.m.data == std::vector<double>{1, 0, 0, 1});
  }
  SUBCASE("single edge gives the all-half matrix") {
    Graph g = Graph::create(2, {{0, 1}}, DenseMatrix(2, 1));
    auto a = normalize_adjacency(g);
    for (double v : a.m.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("triangle gives all entries 1/3") {
    Graph g = Graph::create(3, {{0, 1}, {1, 2}, {0, 2}}, DenseMatrix(3, 1));
    auto a = normalize_adjacency(g);
    for (double v : a.m.data) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
}

TEST_CASE("normalization equals brute-force reconstruction on random graphs") {
  Rng rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(31));  // N ≤ 32
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.next_bernoulli(0.25)) edges.emplace_back(i, j);
    Graph g = Graph::create(n, std::move(edges), DenseMatrix(n, 1));
    auto got = normalize_adjacency(g).m;
    auto want = brute_force_normalized(g);
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-14));
    // symmetry within 1e-12, entries non-negative
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        CHECK(std::fabs(got.at(i, j) - got.at(j, i)) <= 1e-12);
        CHECK(got.at(i, j) >= 0.0);
      }
  }
}

TEST_CASE("few-shot sampling follows the fixed-pool protocol") {
  SbmSpec spec{.blocks = 7, .nodes_per_block = 80, .p_in = 0.1, .p_out = 0.02,
               .feature_dim = 4, .center_scale = 1.0, .noise_scale = 1.0};
  auto [g, t] = generate_sbm_pair(spec, spec, 11);

  SUBCASE("k=1 with 7 classes yields 7 training nodes") {
    auto split = sample_few_shot(g, 1, 12345);
    CHECK(split.train_idx.size() == 7);
    CHECK(split.test_idx.size() == static_cast<std::size_t>(g.num_nodes) * 9 / 10);
  }
  SUBCASE("identical (g,k,seed) gives identical splits") {
    auto s1 = sample_few_shot(g, 2, 777);
    auto s2 = sample_few_shot(g, 2, 777);
    CHECK(s1.train_idx == s2.train_idx);
    CHECK(s1.test_idx == s2.test_idx);
  }
  SUBCASE("test pool is shared across sampling seeds") {
    auto s1 = sample_few_shot(g, 1, 1);
    auto s2 = sample_few_shot(g, 1, 2);
    CHECK(s1.test_idx == s2.test_idx);
    CHECK(s1.train_idx != s2.train_idx);
  }
  SUBCASE("train/test stay disjoint with exact per-class counts") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const int k = 1 + static_cast<int>(rng.next_below(3));
      auto split = sample_few_shot(g, k, rng.next_u64());
      std::set<int> test(split.test_idx.begin(), split.test_idx.end());
      std::vector<int> per_class(static_cast<std::size_t>(g.num_classes), 0);
      for (int v : split.train_idx) {
        CHECK(test.count(v) == 0);
        ++per_class[static_cast<std::size_t>(g.labels[static_cast<std::size_t>(v)])];
      }
      for (int c : per_class) CHECK(c == k);
    }
  }
}

TEST_CASE("infeasible class raises a protocol error naming the class") {
  // class 1 has a single node: it will usually land in the 90% test pool;
  // regardless, k=5 can never be satisfied from a 10% pool of a 10-node graph
  DenseMatrix x(10, 2);
  std::vector<int> labels{0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
  Graph g = Graph::create(10, {{0, 1}}, std::move(x), std::move(labels));
  CHECK_THROWS_WITH_AS(sample_few_shot(g, 5, 3), doctest::Contains("class"), ProtocolError);
}

TEST_CASE("sbm generator shape, labels and degenerate probabilities") {
  SUBCASE("shape contract") {
    SbmSpec spec{.blocks = 3, .nodes_per_block = 50, .p_in = 0.2, .p_out = 0.02,
                 .feature_dim = 5, .center_scale = 1.0, .noise_scale = 0.5};
    auto [s, t] = generate_sbm_pair(spec, spec, 99);
    CHECK(s.num_nodes == 150);
    CHECK(s.num_classes == 3);
    for (int i = 0; i < s.num_nodes; ++i)
      CHECK(s.labels[static_cast<std::size_t>(i)] == i / 50);
  }
  SUBCASE("p_in=1, p_out=0 yields disjoint cliques") {
    SbmSpec spec{.blocks = 2, .nodes_per_block = 2, .p_in = 1.0, .p_out = 0.0,
                 .feature_dim = 2, .center_scale = 1.0, .noise_scale = 0.1};
    auto [s, t] = generate_sbm_pair(spec, spec, 1);
    CHECK(s.edges == std::vector<std::pair<int, int>>{{0, 1}, {2, 3}});
  }
  SUBCASE("determinism") {
    SbmSpec spec{.blocks = 2, .nodes_per_block = 10, .p_in = 0.5, .p_out = 0.1,
                 .feature_dim = 3, .center_scale = 1.0, .noise_scale = 1.0};
    auto [a1, b1] = generate_sbm_pair(spec, spec, 5);
    auto [a2, b2] = generate_sbm_pair(spec, spec, 5);
    CHECK(a1.edges == a2.edges);
    CHECK(a1.features.data == a2.features.data);
    CHECK(b1.features.data == b2.features.data);
  }
}

TEST_CASE("sbm edge counts stay within 3 sigma of the binomial oracle") {
  SbmSpec spec{.blocks = 3, .nodes_per_block = 40, .p_in = 0.2, .p_out = 0.02,
               .feature_dim = 2, .center_scale = 1.0, .noise_scale = 1.0};
  const double in_pairs = 3.0 * (40.0 * 39.0 / 2.0);
  const double out_pairs = (120.0 * 119.0 / 2.0) - in_pairs;
  const double mean = spec.p_in * in_pairs + spec.p_out * out_pairs;
  const double var = spec.p_in * (1 - spec.p_in) * in_pairs +
                     spec.p_out * (1 - spec.p_out) * out_pairs;
  const double sigma = std::sqrt(var);
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto [s, t] = generate_sbm_pair(spec, spec, seed);
    const double edges = static_cast<double>(s.edges.size());
    if (std::fabs(edges - mean) > 3.0 * sigma) ++violations;
  }
  CHECK(violations <= 1);  // 3σ misses ~0.3% of the time
}

TEST_CASE("p_in < p_out rejected") {
  SbmSpec spec{.blocks = 2, .nodes_per_block = 4, .p_in = 0.1, .p_out = 0.5,
               .feature_dim = 2, .center_scale = 1.0, .noise_scale = 1.0};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("augment_view identity, full drop and binomial column masking") {
  SbmSpec spec{.blocks = 2, .nodes_per_block = 20, .p_in = 0.4, .p_out = 0.05,
               .feature_dim = 1000, .center_scale = 1.0, .noise_scale = 1.0};
  auto [g, t] = generate_sbm_pair(spec, spec, 21);

  SUBCASE("zero rates are the identity") {
    Graph v = augment_view(g, 0.0, 0.0, 9);
    CHECK(v.edges == g.edges);
    CHECK(v.features.data == g.features.data);
    CHECK(v.labels == g.labels);
  }
  SUBCASE("p_edge_drop=1 removes every edge") {
    Graph v = augment_view(g, 1.0, 0.0, 9);
    CHECK(v.edges.empty());
  }
  SUBCASE("column masking is binomial over seeds") {
    // d=1000, p=0.5 → mean 500, σ ≈ 15.8
    int violations = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Graph v = augment_view(g, 0.0, 0.5, seed);
      int zeroed = 0;
      for (int d = 0; d < v.features.cols; ++d) {
        bool all_zero = true;
        for (int i = 0; i < v.num_nodes && all_zero; ++i)
          if (v.features.at(i, d) != 0.0) all_zero = false;
        if (all_zero) ++zeroed;
      }
      if (std::fabs(zeroed - 500.0) > 3.0 * 15.811) ++violations;
    }
    CHECK(violations == 0);
  }
  SUBCASE("determinism per seed") {
    Graph v1 = augment_view(g, 0.3, 0.3, 4);
    Graph v2 = augment_view(g, 0.3, 0.3, 4);
    CHECK(v1.edges == v2.edges);
    CHECK(v1.features.data == v2.features.data);
  }
}
