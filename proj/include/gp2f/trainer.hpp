#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gp2f/graph.hpp"
#include "gp2f/losses.hpp"
#include "gp2f/model.hpp"

namespace gp2f {

// Downstream adaptation variants: the full method, its loss ablations, the
// adapted-branch-only route, and the two baselines.
enum class Variant { full, no_ctr, no_fus, no_both, prompt_only, lp, ft };

Variant parse_variant(const std::string& name);  // UsageError lists valid names
const char* variant_name(Variant v);

// How the classification head reads the two branches.
enum class FusionMode { learnable, fixed_zero, fixed_one };

// Pins α to an endpoint while keeping the rest of the machinery; used by the
// collapse checks (α≡1 with zero adapter learning rate reproduces LP).
enum class FusionOverride { none, zero, one };

struct TrainConfig {
  int epochs = 500;
  int patience = 20;
  double up_lr = 1e-3;    // projector + adapters + β + fusion logit
  double down_lr = 1e-2;  // classifier
  double up_wd = 5e-4;
  double down_wd = 5e-4;
  LossWeights weights;
  int shots = 1;
  std::vector<std::uint64_t> seeds{12345, 23456, 34567, 45678, 56789};
  int samplings = 10;
  int adapter_rank = kDefaultAdapterRank;
  double beta_init = kDefaultBetaInit;
  double fusion_logit_init = kDefaultFusionLogitInit;
  FusionOverride fusion_override = FusionOverride::none;
  // Projector handling for the target domain: carried over from the
  // checkpoint when dimensions match (re-initialized when they differ or
  // when this is set).
  bool reinit_projector = false;
  int workers = 1;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  LossReport losses;
  double alpha = 0.0;
  double beta1 = 0.0, beta2 = 0.0;  // adapter scales (0 when no adapters)
  double delta_norm = 0.0;          // ‖mean(H_pre − H_adp)‖ diagnostic
};

struct TrainedModel {
  Variant variant = Variant::full;
  FusionMode fusion_mode = FusionMode::learnable;
  bool has_adapters = false;
  ProjectorParams proj;
  EncoderParams enc;  // frozen snapshot (the fine-tuned copy for ft)
  AdapterParams adapters;
  FusionParams fusion;
  ClassifierParams cls;
};

struct AdaptResult {
  TrainedModel model;
  double best_loss = 0.0;
  int epochs_ran = 0;
  double final_alpha = 0.0;
  double final_beta[2] = {0.0, 0.0};
  std::vector<EpochLog> log;
};

// One downstream adaptation run: the training loop with early stopping on
// the training objective (patience epochs without improvement; best-loss
// parameters restored on exit). Deterministic in (inputs, run_seed).
AdaptResult adapt(const Graph& target, const Checkpoint& ckpt, const TrainConfig& cfg,
                  const FewShotSplit& split, Variant variant, std::uint64_t run_seed);

// Argmax accuracy over test_idx; ties resolve to the lowest class index.
double evaluate(const TrainedModel& model, const Graph& g, const std::vector<int>& test_idx);

struct RunRecord {
  std::string variant;
  std::uint64_t seed = 0;
  int sampling = 0;
  double accuracy = 0.0;
  int epochs_ran = 0;
  double final_alpha = 0.0;
};

struct VariantSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation over runs
  int count = 0;
};

struct TrainLogRow {
  std::string variant;
  std::uint64_t seed = 0;
  int sampling = 0;
  int epoch = 0;
  double cls = 0, ctr = 0, fus = 0, total = 0, alpha = 0;
  double beta1 = 0, beta2 = 0;
  double delta_norm = 0;
};

struct RunReport {
  std::vector<RunRecord> records;  // ordered by (variant, seed, sampling)
  std::map<std::string, VariantSummary> summary;
  std::vector<TrainLogRow> epoch_log;
};

// seeds × samplings episodes per variant. Every variant sees byte-identical
// split and initialization streams (paired comparison); independent episodes
// may run on cfg.workers threads with a fixed aggregation order.
RunReport run_protocol(const Graph& target, const Checkpoint& ckpt, const TrainConfig& cfg,
                       const std::vector<Variant>& variants);

// 17-significant-digit CSV / JSON writers for the protocol outputs.
void write_results_csv(const RunReport& report, const std::string& path);
void write_summary_json(const RunReport& report, const std::string& path);
void write_training_log_csv(const RunReport& report, const std::string& path);

}  // namespace gp2f
