#pragma once

#include <cstdint>
#include <vector>

#include "gp2f/graph.hpp"
#include "gp2f/model.hpp"
#include "gp2f/trainer.hpp"

namespace gp2f {

// Self-supervised pre-training configuration: node-level contrast between two
// stochastically augmented views, standard-denominator InfoNCE, Adam.
struct PretrainConfig {
  int epochs = 1000;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double tau_pre = 0.5;
  double p_edge_drop_view1 = 0.2;
  double p_feat_mask_view1 = 0.2;
  double p_edge_drop_view2 = 0.2;
  double p_feat_mask_view2 = 0.2;
  int hidden_dim = kDefaultHiddenDim;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PretrainResult {
  Checkpoint checkpoint;  // frozen encoder + trained projector
  std::vector<double> epoch_losses;
};

// Trains encoder and projector jointly on the source graph, then freezes the
// encoder. Aborts with a numeric error naming the epoch if the loss turns
// non-finite.
PretrainResult grace_pretrain(const Graph& source, const PretrainConfig& cfg);

// Fig.-1 baselines, expressed as degenerate adaptation runs so that their
// trajectories share every code path with the main method.
double linear_probe(const Graph& g, const Checkpoint& ckpt, const FewShotSplit& split,
                    const TrainConfig& cfg, std::uint64_t run_seed);
double full_finetune(const Graph& g, const Checkpoint& ckpt, const FewShotSplit& split,
                     const TrainConfig& cfg, std::uint64_t run_seed);

}  // namespace gp2f
