#include "gp2f/pretrain.hpp"

#include <cmath>

#include "gp2f/error.hpp"
#include "gp2f/losses.hpp"
#include "gp2f/optim.hpp"
#include "gp2f/rng.hpp"

namespace gp2f {

void PretrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("pretrain config: epochs must be >= 1");
  if (tau_pre <= 0.0) throw ConfigError("pretrain config: tau_pre must be positive");
  if (hidden_dim < 1) throw ConfigError("pretrain config: hidden_dim must be >= 1");
  if (lr < 0.0 || weight_decay < 0.0)
    throw ConfigError("pretrain config: lr and weight_decay must be >= 0");
  for (double p : {p_edge_drop_view1, p_feat_mask_view1, p_edge_drop_view2, p_feat_mask_view2})
    if (p < 0.0 || p > 1.0)
      throw ConfigError("pretrain config: augmentation rates must lie in [0,1]");
}

namespace {

// Standard-denominator InfoNCE over two encoded views: the positive is the
// same node across views; negatives are all other nodes in both views.
int tape_infonce(Tape& t, int z1, int z2, int n, double tau) {
  const double inv_tau = 1.0 / tau;
  DenseMatrix eye = DenseMatrix::identity(n);
  DenseMatrix off(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) off.at(i, j) = i == j ? 0.0 : 1.0;

  int u = t.row_l2_normalize(z1);
  int v = t.row_l2_normalize(z2);
  auto direction = [&](int a, int b) {
    int cross = t.exp(t.scale(t.matmul_nt(a, b), inv_tau));
    int same = t.exp(t.scale(t.matmul_nt(a, a), inv_tau));
    int num = t.row_sum(t.mul_mask(cross, eye));
    int den = t.add(num, t.add(t.row_sum(t.mul_mask(same, off)),
                               t.row_sum(t.mul_mask(cross, off))));
    return t.sum(t.sub(t.log(den), t.log(num)));
  };
  return t.scale(t.add(direction(u, v), direction(v, u)), 1.0 / (2.0 * n));
}

}  // namespace

PretrainResult grace_pretrain(const Graph& source, const PretrainConfig& cfg) {
  cfg.validate();
  if (source.num_nodes < 2)
    throw ProtocolError("grace_pretrain: source graph needs at least 2 nodes");

  ProjectorParams proj = init_projector(
      source.feature_dim(), cfg.hidden_dim,
      Rng::derive(cfg.seed, {Rng::tag("pretrain-init"), Rng::tag("proj")}));
  EncoderParams enc = init_encoder(
      cfg.hidden_dim, Rng::derive(cfg.seed, {Rng::tag("pretrain-init"), Rng::tag("enc")}));

  ParamStore store;
  const int p_pw1 = store.add("proj.w1", ParamGroup::up, std::move(proj.w1));
  const int p_pw2 = store.add("proj.w2", ParamGroup::up, std::move(proj.w2));
  const int p_ew1 = store.add("enc.w1", ParamGroup::up, std::move(enc.w1));
  const int p_ew2 = store.add("enc.w2", ParamGroup::up, std::move(enc.w2));

  AdamState opt(AdamHyper{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  PretrainResult result;
  result.epoch_losses.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    try {
      const auto e64 = static_cast<std::uint64_t>(epoch);
      Graph view1 = augment_view(
          source, cfg.p_edge_drop_view1, cfg.p_feat_mask_view1,
          Rng::derive(cfg.seed, {Rng::tag("view1"), e64}).next_u64());
      Graph view2 = augment_view(
          source, cfg.p_edge_drop_view2, cfg.p_feat_mask_view2,
          Rng::derive(cfg.seed, {Rng::tag("view2"), e64}).next_u64());
      NormalizedAdjacency a1 = normalize_adjacency(view1);
      NormalizedAdjacency a2 = normalize_adjacency(view2);

      Tape tape;
      std::vector<int> ids(store.size());
      for (std::size_t i = 0; i < store.size(); ++i)
        ids[i] = tape.input(store.at(static_cast<int>(i)).value);

      auto encode = [&](const Graph& g, const NormalizedAdjacency& a) {
        int h0 = tape_projector(tape, tape.constant(g.features),
                                ids[static_cast<std::size_t>(p_pw1)],
                                ids[static_cast<std::size_t>(p_pw2)]);
        return tape_frozen_branch(tape, tape.constant(a.m), h0,
                                  ids[static_cast<std::size_t>(p_ew1)],
                                  ids[static_cast<std::size_t>(p_ew2)]);
      };
      const int z1 = encode(view1, a1);
      const int z2 = encode(view2, a2);
      const int loss = tape_infonce(tape, z1, z2, source.num_nodes, cfg.tau_pre);
      result.epoch_losses.push_back(tape.scalar_value(loss));

      tape.backward(loss);
      std::vector<DenseMatrix*> params;
      std::vector<const DenseMatrix*> grads;
      for (std::size_t i = 0; i < store.size(); ++i) {
        params.push_back(&store.at(static_cast<int>(i)).value);
        grads.push_back(&tape.grad(ids[i]));
      }
      opt.step(params, grads);
    } catch (const NumericError& e) {
      throw NumericError("pre-training aborted at epoch " + std::to_string(epoch) + ": " +
                         e.what());
    }
  }

  Checkpoint ckpt;
  ckpt.proj.w1 = store.at(p_pw1).value;
  ckpt.proj.w2 = store.at(p_pw2).value;
  ckpt.enc.w1 = store.at(p_ew1).value;
  ckpt.enc.w2 = store.at(p_ew2).value;
  ckpt.enc.frozen = true;  // snapshot; downstream stages treat it as constant
  ckpt.pretrain_seed = cfg.seed;
  ckpt.input_dim = source.feature_dim();
  result.checkpoint = std::move(ckpt);
  return result;
}

double linear_probe(const Graph& g, const Checkpoint& ckpt, const FewShotSplit& split,
                    const TrainConfig& cfg, std::uint64_t run_seed) {
  AdaptResult r = adapt(g, ckpt, cfg, split, Variant::lp, run_seed);
  return evaluate(r.model, g, split.test_idx);
}

double full_finetune(const Graph& g, const Checkpoint& ckpt, const FewShotSplit& split,
                     const TrainConfig& cfg, std::uint64_t run_seed) {
  AdaptResult r = adapt(g, ckpt, cfg, split, Variant::ft, run_seed);
  return evaluate(r.model, g, split.test_idx);
}

}  // namespace gp2f
