#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gp2f/matrix.hpp"

namespace gp2f {

// Undirected attributed graph. Edges are stored deduplicated in (i, j), i < j
// canonical order with no self-loops; feature row order defines the node
// indexing. Immutable after construction.
struct Graph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  DenseMatrix features;     // num_nodes × feature_dim
  std::vector<int> labels;  // empty when unlabeled
  int num_classes = 0;

  bool has_labels() const { return !labels.empty(); }
  int feature_dim() const { return features.cols; }

  // Canonicalizes (symmetrize, dedupe, drop self-loops) and validates.
  static Graph create(int num_nodes, std::vector<std::pair<int, int>> edges,
                      DenseMatrix features, std::vector<int> labels = {});

  // Binary adjacency without self-loops.
  DenseMatrix adjacency_dense() const;
  std::vector<std::vector<int>> adjacency_lists() const;
};

// Â = D̃^{-1/2} (A + I) D̃^{-1/2} with D̃ the degree matrix of A + I.
struct NormalizedAdjacency {
  DenseMatrix m;
};

NormalizedAdjacency normalize_adjacency(const Graph& g);

// k-shot episode: exactly k training nodes per class drawn from the fixed
// 10% pool; the test side is the whole 90% pool.
struct FewShotSplit {
  std::vector<int> train_idx;
  std::vector<int> test_idx;
  int k = 0;
  std::uint64_t seed = 0;
};

// The 90% test pool is a random partition fixed by dedicated seed 0, shared
// by every episode on the same graph; the k-shot training set is sampled from
// the remaining 10% with `seed`.
FewShotSplit sample_few_shot(const Graph& g, int k, std::uint64_t seed);

// Planted-partition generator spec. Block id doubles as the class label.
struct SbmSpec {
  int blocks = 0;
  int nodes_per_block = 0;
  double p_in = 0.0;
  double p_out = 0.0;
  int feature_dim = 0;
  double center_scale = 1.0;
  double noise_scale = 1.0;
  std::vector<double> feature_shift;  // empty or length feature_dim

  void validate() const;
};

// Source/target pair for cross-domain runs. Both graphs share the same class
// center directions (scaled by each spec's center_scale) so that the pair
// forms a genuine transfer problem; the target additionally applies its
// feature_shift and its own structure/noise parameters.
std::pair<Graph, Graph> generate_sbm_pair(const SbmSpec& source, const SbmSpec& target,
                                          std::uint64_t seed);

// GRACE-style stochastic view: each edge dropped independently with
// p_edge_drop, each feature column zeroed with p_feat_mask. Labels preserved.
Graph augment_view(const Graph& g, double p_edge_drop, double p_feat_mask,
                   std::uint64_t seed);

// Plain-text ingestion; formats are documented in the README. Row order in
// the features file defines node indices.
Graph load_graph(const std::string& features_path, const std::string& edges_path,
                 const std::optional<std::string>& labels_path = std::nullopt);

// Inverse of load_graph, used by dataset generation.
void save_graph(const Graph& g, const std::string& features_path,
                const std::string& edges_path,
                const std::optional<std::string>& labels_path);

}  // namespace gp2f
