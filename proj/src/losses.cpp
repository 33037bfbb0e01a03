#include "gp2f/losses.hpp"

#include <algorithm>
#include <cmath>

#include "gp2f/error.hpp"

namespace gp2f {

int LossWeights::effective_batch(int n) const {
  if (batch_size > 0) return std::min(batch_size, n);
  return std::min(n, 256);
}

void LossWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0)
    throw ConfigError("loss weights lambda1/lambda2 must be non-negative");
  if (tau_ctr <= 0.0) throw ConfigError("tau_ctr must be positive");
  if (tau_fus <= 0.0) throw ConfigError("tau_fus must be positive");
  if (!(threshold_t > -1.0 && threshold_t < 1.0))
    throw ConfigError("threshold_t must lie in (-1, 1)");
}

namespace {

// Masks for the contrastive sets: identity (same-node cross-view pair),
// adjacency (neighbor positives) and the complement (negatives).
struct CtrMasks {
  DenseMatrix eye;
  DenseMatrix adj;
  DenseMatrix rest;  // 1 − I − A: both-view non-neighbor others
};

CtrMasks contrastive_masks(const Graph& g) {
  const int n = g.num_nodes;
  CtrMasks m{DenseMatrix(n, n), g.adjacency_dense(), DenseMatrix(n, n)};
  for (int i = 0; i < n; ++i) m.eye.at(i, i) = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m.rest.at(i, j) = 1.0 - m.eye.at(i, j) - m.adj.at(i, j);
  return m;
}

// One anchor direction of the loss: Σ_i log(den_i) − log(num_i) where
// num_i collects the cross-view self pair plus both-view neighbors and
// den_i adds the both-view non-neighbor negatives.
int ctr_direction(Tape& t, int anchor_norm, int other_norm, const CtrMasks& m, double tau) {
  const double inv_tau = 1.0 / tau;
  int sim_same = t.exp(t.scale(t.matmul_nt(anchor_norm, anchor_norm), inv_tau));
  int sim_cross = t.exp(t.scale(t.matmul_nt(anchor_norm, other_norm), inv_tau));

  int num = t.add(t.row_sum(t.mul_mask(sim_cross, m.eye)),
                  t.add(t.row_sum(t.mul_mask(sim_same, m.adj)),
                        t.row_sum(t.mul_mask(sim_cross, m.adj))));
  int den = t.add(num, t.add(t.row_sum(t.mul_mask(sim_same, m.rest)),
                             t.row_sum(t.mul_mask(sim_cross, m.rest))));
  return t.sum(t.sub(t.log(den), t.log(num)));
}

}  // namespace

int tape_contrastive_loss(Tape& t, int h_pre, int h_adp, const Graph& g, double tau_ctr) {
  if (tau_ctr <= 0.0) throw ConfigError("contrastive_loss: tau_ctr must be positive");
  CtrMasks m = contrastive_masks(g);
  int u = t.row_l2_normalize(h_pre);
  int v = t.row_l2_normalize(h_adp);
  int lg = ctr_direction(t, u, v, m, tau_ctr);
  int la = ctr_direction(t, v, u, m, tau_ctr);
  return t.scale(t.add(lg, la), 1.0 / (2.0 * g.num_nodes));
}

int tape_self_similarity(Tape& t, int h) {
  int hn = t.row_l2_normalize(h);
  return t.matmul_nt(hn, hn);
}

int tape_mix_similarity(Tape& t, int s_pre, int s_adp, int alpha) {
  return t.affine_mix(s_pre, s_adp, alpha);
}

DenseMatrix consistency_mask(const DenseMatrix& s_mix, const DenseMatrix& adj, double t) {
  if (!s_mix.same_shape(adj) || s_mix.rows != s_mix.cols)
    throw DimensionError("consistency_mask: square same-shape inputs required");
  if (!(t > -1.0 && t < 1.0)) throw ConfigError("consistency_mask: t must lie in (-1,1)");
  const int n = s_mix.rows;
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool connected = adj.at(i, j) != 0.0;
      const bool similar = s_mix.at(i, j) > t;
      m.at(i, j) = (similar == connected) ? 1.0 : 0.0;
    }
  return m;
}

FusionLossNode tape_fusion_loss(Tape& t, int s_mix, const DenseMatrix& adj,
                                const DenseMatrix& mask, double tau_fus) {
  if (tau_fus <= 0.0) throw ConfigError("fusion_loss: tau_fus must be positive");
  const DenseMatrix& s = t.value(s_mix);
  if (!s.same_shape(adj) || !s.same_shape(mask))
    throw DimensionError("fusion_loss: shape mismatch");

  long count = 0;
  DenseMatrix pos = mask, neg = mask;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.data[i] != 0.0) ++count;
    pos.data[i] = mask.data[i] * adj.data[i];
    neg.data[i] = mask.data[i] * (1.0 - adj.data[i]);
  }
  FusionLossNode out;
  out.mask_size = count;
  if (count == 0) {
    out.degenerate = true;
    out.node = t.constant(DenseMatrix(1, 1));
    return out;
  }
  // BCE(σ(s/τ), a) = −a·logσ(s/τ) − (1−a)·logσ(−s/τ), averaged over the mask.
  int term_pos = t.masked_sum(t.logsigmoid(t.scale(s_mix, 1.0 / tau_fus)), std::move(pos));
  int term_neg = t.masked_sum(t.logsigmoid(t.scale(s_mix, -1.0 / tau_fus)), std::move(neg));
  out.node = t.scale(t.add(term_pos, term_neg), -1.0 / static_cast<double>(count));
  return out;
}

int tape_cross_entropy(Tape& t, int logits, const std::vector<int>& labels) {
  return t.softmax_cross_entropy(logits, labels);
}

// ---- plain versions ----

double contrastive_loss(const DenseMatrix& h_pre, const DenseMatrix& h_adp, const Graph& g,
                        double tau_ctr) {
  Tape t;
  return t.scalar_value(
      tape_contrastive_loss(t, t.constant(h_pre), t.constant(h_adp), g, tau_ctr));
}

DenseMatrix self_similarity(const DenseMatrix& h) {
  Tape t;
  return t.value(tape_self_similarity(t, t.constant(h)));
}

DenseMatrix mix_similarity(const DenseMatrix& s_pre, const DenseMatrix& s_adp, double alpha) {
  Tape t;
  DenseMatrix a(1, 1);
  a.data[0] = alpha;
  return t.value(
      tape_mix_similarity(t, t.constant(s_pre), t.constant(s_adp), t.constant(std::move(a))));
}

namespace {
DenseMatrix restrict_to(const DenseMatrix& m, const std::vector<int>& idx) {
  DenseMatrix out(static_cast<int>(idx.size()), static_cast<int>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j)
      out.at(static_cast<int>(i), static_cast<int>(j)) = m.at(idx[i], idx[j]);
  return out;
}
}  // namespace

double fusion_loss(const DenseMatrix& s_mix, const DenseMatrix& adj, const DenseMatrix& mask,
                   double tau_fus, bool* degenerate,
                   const std::optional<std::vector<int>>& batch) {
  Tape t;
  FusionLossNode r;
  if (batch) {
    r = tape_fusion_loss(t, t.constant(restrict_to(s_mix, *batch)), restrict_to(adj, *batch),
                         restrict_to(mask, *batch), tau_fus);
  } else {
    r = tape_fusion_loss(t, t.constant(s_mix), adj, mask, tau_fus);
  }
  if (degenerate) *degenerate = r.degenerate;
  return t.scalar_value(r.node);
}

double cross_entropy(const DenseMatrix& logits, const std::vector<int>& labels) {
  Tape t;
  return t.scalar_value(tape_cross_entropy(t, t.constant(logits), labels));
}

LossReport total_loss(double cls, double ctr, double fus, const LossWeights& w,
                      bool fusion_mask_degenerate) {
  for (double v : {cls, ctr, fus})
    if (!std::isfinite(v)) throw NumericError("total_loss: non-finite loss term");
  LossReport r;
  r.cls = cls;
  r.ctr = ctr;
  r.fus = fus;
  r.total = cls + w.lambda1 * ctr + w.lambda2 * fus;
  r.fusion_mask_degenerate = fusion_mask_degenerate;
  return r;
}

}  // namespace gp2f
