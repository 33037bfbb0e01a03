#pragma once

#include <optional>
#include <vector>

#include "gp2f/graph.hpp"
#include "gp2f/matrix.hpp"
#include "gp2f/tape.hpp"

namespace gp2f {

struct LossWeights {
  double lambda1 = 0.5;     // contrastive weight
  double lambda2 = 0.5;     // fusion weight
  double tau_ctr = 0.5;
  double tau_fus = 0.1;
  double threshold_t = 0.5;  // consistency threshold, in (−1, 1)
  int batch_size = 0;        // fusion-loss node subsample; ≤0 → min(N, 256)

  int effective_batch(int n) const;
  void validate() const;
};

struct LossReport {
  double cls = 0.0;
  double ctr = 0.0;
  double fus = 0.0;
  double total = 0.0;
  // Filled only when the trainer runs its per-term diagnostic backward
  // passes; −1 means "not computed this epoch".
  double grad_norm_cls = -1.0;
  double grad_norm_ctr = -1.0;
  double grad_norm_fus = -1.0;
  bool fusion_mask_degenerate = false;
};

// ---- tape builders ----

// Cross-branch structural contrastive loss. Anchors in one branch take the
// other branch's same-node embedding plus both-view neighbor embeddings as
// positives; negatives are both-view embeddings of all non-neighbor other
// nodes. Rows are l2-normalized before the exp(·/τ) similarity. Symmetric
// over the two anchor directions, averaged over 2N anchor terms.
int tape_contrastive_loss(Tape& t, int h_pre, int h_adp, const Graph& g, double tau_ctr);

// Cosine self-similarity: rows normalized, then the gram matrix.
int tape_self_similarity(Tape& t, int h);

int tape_mix_similarity(Tape& t, int s_pre, int s_adp, int alpha);

// Consistency mask over the current similarity values: pairs whose
// similarity already agrees with adjacency relative to threshold t.
// Diagonal excluded; returns a 0/1 matrix of ordered pairs.
DenseMatrix consistency_mask(const DenseMatrix& s_mix, const DenseMatrix& adj, double t);

struct FusionLossNode {
  int node = -1;
  bool degenerate = false;  // empty mask → constant-zero loss
  long mask_size = 0;       // ordered pairs
};

// Mean binary cross-entropy of logistic(S/τ) against adjacency over the
// masked-in pairs, computed in log-sigmoid form.
FusionLossNode tape_fusion_loss(Tape& t, int s_mix, const DenseMatrix& adj,
                                const DenseMatrix& mask, double tau_fus);

int tape_cross_entropy(Tape& t, int logits, const std::vector<int>& labels);

// ---- plain-value versions (same builders on a scratch tape) ----

double contrastive_loss(const DenseMatrix& h_pre, const DenseMatrix& h_adp, const Graph& g,
                        double tau_ctr);
DenseMatrix self_similarity(const DenseMatrix& h);
DenseMatrix mix_similarity(const DenseMatrix& s_pre, const DenseMatrix& s_adp, double alpha);
double fusion_loss(const DenseMatrix& s_mix, const DenseMatrix& adj, const DenseMatrix& mask,
                   double tau_fus, bool* degenerate = nullptr,
                   const std::optional<std::vector<int>>& batch = std::nullopt);
double cross_entropy(const DenseMatrix& logits, const std::vector<int>& labels);

LossReport total_loss(double cls, double ctr, double fus, const LossWeights& w,
                      bool fusion_mask_degenerate = false);

}  // namespace gp2f
