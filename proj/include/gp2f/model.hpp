#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gp2f/graph.hpp"
#include "gp2f/matrix.hpp"
#include "gp2f/rng.hpp"
#include "gp2f/tape.hpp"

namespace gp2f {

inline constexpr int kDefaultHiddenDim = 128;
inline constexpr int kDefaultAdapterRank = 32;
inline constexpr double kDefaultBetaInit = 1e-3;
// α = logistic(2) ≈ 0.88: start out trusting the frozen branch.
inline constexpr double kDefaultFusionLogitInit = 2.0;

// Dimension-aligning MLP: relu(X·w1)·w2, one hidden layer of the encoder
// width. Trainable in both stages.
struct ProjectorParams {
  DenseMatrix w1;  // in_dim × hidden
  DenseMatrix w2;  // hidden × hidden
};

// 2-layer GCN weights. `frozen` is set once pre-training finishes; downstream
// code treats frozen weights as constants and never routes gradients to them.
struct EncoderParams {
  DenseMatrix w1;  // hidden × hidden
  DenseMatrix w2;  // hidden × hidden
  bool frozen = false;
  int hidden_dim() const { return w1.rows; }
};

// Bottleneck adapter for one GCN layer: x + beta · up(relu(down(x))).
struct AdapterLayerParams {
  DenseMatrix down;  // hidden × rank
  DenseMatrix up;    // rank × hidden
  double beta = kDefaultBetaInit;
};

struct AdapterParams {
  std::array<AdapterLayerParams, 2> layer;
  int rank() const { return layer[0].down.cols; }
};

// Raw fusion logit; the mixing weight is its logistic squash, strictly inside
// (0,1) for every finite logit.
struct FusionParams {
  double logit = kDefaultFusionLogitInit;
  double alpha() const;
};

struct ClassifierParams {
  DenseMatrix w;  // hidden × classes
  DenseMatrix b;  // 1 × classes
};

ProjectorParams init_projector(int in_dim, int hidden_dim, Rng rng);
EncoderParams init_encoder(int hidden_dim, Rng rng);
AdapterParams init_adapters(int hidden_dim, int rank, double beta_init, Rng rng);
ClassifierParams init_classifier(int hidden_dim, int num_classes, Rng rng);

// ---- plain forward ops (inference / tests) ----

DenseMatrix project_features(const DenseMatrix& x, const ProjectorParams& proj);

// relu(Â·H·W) when `activate`, else Â·H·W.
DenseMatrix gcn_layer(const DenseMatrix& h, const NormalizedAdjacency& ahat,
                      const DenseMatrix& w, bool activate);

// Frozen branch: both GCN layers over Proj(X), last layer unactivated.
// Throws ContractError unless enc.frozen.
DenseMatrix encode_frozen(const Graph& g, const NormalizedAdjacency& ahat,
                          const EncoderParams& enc, const ProjectorParams& proj);

// Adapter branch: per layer, GCN output plus the scaled bottleneck residual.
DenseMatrix encode_adapted(const Graph& g, const NormalizedAdjacency& ahat,
                           const EncoderParams& enc, const AdapterParams& adapters,
                           const ProjectorParams& proj);

// α·H_pre + (1−α)·H_adp with α = logistic(fusion.logit).
DenseMatrix fuse(const DenseMatrix& h_pre, const DenseMatrix& h_adp,
                 const FusionParams& fusion);

DenseMatrix classify(const DenseMatrix& h, const ClassifierParams& cls);

struct BranchOutputs {
  DenseMatrix h_pre;
  DenseMatrix h_adp;
  DenseMatrix h_mix;
  double alpha = 0.0;
};

BranchOutputs encode_dual(const Graph& g, const NormalizedAdjacency& ahat,
                          const EncoderParams& enc, const AdapterParams& adapters,
                          const ProjectorParams& proj, const FusionParams& fusion);

// ---- tape builders (training path) ----

int tape_projector(Tape& t, int x, int w1, int w2);
int tape_gcn_layer(Tape& t, int ahat, int h, int w, bool activate);
int tape_frozen_branch(Tape& t, int ahat, int h0, int enc_w1, int enc_w2);

struct TapeAdapter {
  int down = -1;
  int up = -1;
  int beta = -1;  // 1×1 node
};

int tape_adapted_branch(Tape& t, int ahat, int h0, int enc_w1, int enc_w2,
                        const TapeAdapter& l1, const TapeAdapter& l2);
int tape_classifier(Tape& t, int h, int w, int b);

// ---- checkpoint ----

struct Checkpoint {
  EncoderParams enc;  // frozen
  ProjectorParams proj;
  std::uint64_t pretrain_seed = 0;
  int input_dim = 0;
};

// Single JSON document with shape headers; numbers round-trip bit-exactly
// (shortest-round-trip double formatting), so load → save reproduces the
// file byte for byte.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// ---- parameter registry for optimization ----

enum class ParamGroup { up, down };

struct NamedParam {
  std::string name;
  ParamGroup group;
  DenseMatrix value;
};

// Ordered, name-addressable parameter set; the order fixes the optimizer's
// iteration order and therefore the update arithmetic.
class ParamStore {
 public:
  int add(std::string name, ParamGroup group, DenseMatrix value);
  int find(const std::string& name) const;  // -1 when absent
  NamedParam& at(int i) { return params_[static_cast<std::size_t>(i)]; }
  const NamedParam& at(int i) const { return params_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return params_.size(); }

  std::vector<DenseMatrix> snapshot() const;
  void restore(const std::vector<DenseMatrix>& snap);

 private:
  std::vector<NamedParam> params_;
};

}  // namespace gp2f
