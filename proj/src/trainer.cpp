#include "gp2f/trainer.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "gp2f/error.hpp"
#include "gp2f/optim.hpp"
#include "gp2f/rng.hpp"
#include "gp2f/theory.hpp"

namespace gp2f {

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "no_ctr") return Variant::no_ctr;
  if (name == "no_fus") return Variant::no_fus;
  if (name == "no_both") return Variant::no_both;
  if (name == "prompt_only") return Variant::prompt_only;
  if (name == "lp") return Variant::lp;
  if (name == "ft") return Variant::ft;
  throw UsageError("unknown variant '" + name +
                   "'; valid: full, no_ctr, no_fus, no_both, prompt_only, lp, ft");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_ctr: return "no_ctr";
    case Variant::no_fus: return "no_fus";
    case Variant::no_both: return "no_both";
    case Variant::prompt_only: return "prompt_only";
    case Variant::lp: return "lp";
    case Variant::ft: return "ft";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (patience < 1) throw ConfigError("train config: patience must be >= 1");
  if (shots < 1) throw ConfigError("train config: shots must be >= 1");
  if (samplings < 1) throw ConfigError("train config: samplings must be >= 1");
  if (seeds.empty()) throw ConfigError("train config: seed list is empty");
  if (workers < 1) throw ConfigError("train config: workers must be >= 1");
  if (adapter_rank < 1) throw ConfigError("train config: adapter_rank must be >= 1");
  for (double lr : {up_lr, down_lr})
    if (lr < 0.0) throw ConfigError("train config: learning rates must be >= 0");
  for (double wd : {up_wd, down_wd})
    if (wd < 0.0) throw ConfigError("train config: weight decay must be >= 0");
  weights.validate();
}

namespace {

struct VariantTraits {
  bool use_adapters = true;
  bool train_projector = true;
  bool train_encoder = false;
  FusionMode mode = FusionMode::learnable;
  bool ctr_active = true;
  bool fus_active = true;
};

VariantTraits traits_for(Variant v, const TrainConfig& cfg) {
  VariantTraits t;
  switch (v) {
    case Variant::full:
      break;
    case Variant::no_ctr:
      t.ctr_active = false;
      break;
    case Variant::no_fus:
      t.fus_active = false;
      break;
    case Variant::no_both:
      t.ctr_active = t.fus_active = false;
      break;
    case Variant::prompt_only:
      t.mode = FusionMode::fixed_zero;
      break;
    case Variant::lp:
      t = VariantTraits{false, false, false, FusionMode::fixed_one, false, false};
      break;
    case Variant::ft:
      t = VariantTraits{false, true, true, FusionMode::fixed_one, false, false};
      break;
  }
  if (cfg.fusion_override == FusionOverride::zero) t.mode = FusionMode::fixed_zero;
  if (cfg.fusion_override == FusionOverride::one) t.mode = FusionMode::fixed_one;
  return t;
}

Rng init_stream(std::uint64_t run_seed, const char* name) {
  return Rng::derive(run_seed, {Rng::tag("init"), Rng::tag(name)});
}

double grad_norm_over(const Tape& tape, const std::vector<int>& ids) {
  double sq = 0.0;
  for (int id : ids) {
    if (!tape.has_grad(id)) continue;
    const DenseMatrix& g = tape.grad(id);
    for (double v : g.data) sq += v * v;
  }
  return std::sqrt(sq);
}

}  // namespace

AdaptResult adapt(const Graph& target, const Checkpoint& ckpt, const TrainConfig& cfg,
                  const FewShotSplit& split, Variant variant, std::uint64_t run_seed) {
  cfg.validate();
  if (!ckpt.enc.frozen) throw ContractError("adapt: checkpoint encoder is not frozen");
  if (!target.has_labels()) throw ProtocolError("adapt: target graph has no labels");

  const VariantTraits tr = traits_for(variant, cfg);
  if (tr.mode == FusionMode::fixed_zero && !tr.use_adapters)
    throw ConfigError("fixed_alpha=0 needs an adapted branch; not available for variant " +
                      std::string(variant_name(variant)));
  LossWeights w = cfg.weights;
  if (!tr.ctr_active) w.lambda1 = 0.0;
  if (!tr.fus_active) w.lambda2 = 0.0;
  const bool need_ctr = w.lambda1 > 0.0;
  const bool need_fus = w.lambda2 > 0.0;

  const int hidden = ckpt.enc.hidden_dim();
  const NormalizedAdjacency ahat = normalize_adjacency(target);
  const DenseMatrix adj = target.adjacency_dense();

  std::vector<int> train_labels;
  train_labels.reserve(split.train_idx.size());
  for (int v : split.train_idx)
    train_labels.push_back(target.labels[static_cast<std::size_t>(v)]);

  // Projector: carried over from pre-training when compatible.
  ProjectorParams proj0;
  if (target.feature_dim() == ckpt.input_dim && !cfg.reinit_projector) {
    proj0 = ckpt.proj;
  } else {
    proj0 = init_projector(target.feature_dim(), hidden, init_stream(run_seed, "proj"));
  }
  AdapterParams adapters0;
  if (tr.use_adapters)
    adapters0 = init_adapters(hidden, cfg.adapter_rank, cfg.beta_init,
                              init_stream(run_seed, "adapters"));
  ClassifierParams cls0 =
      init_classifier(hidden, target.num_classes, init_stream(run_seed, "classifier"));

  // Parameter registry; insertion order fixes optimizer arithmetic.
  ParamStore store;
  int p_proj_w1 = -1, p_proj_w2 = -1, p_enc_w1 = -1, p_enc_w2 = -1;
  int p_logit = -1;
  struct AdapterIdx {
    int down = -1, up = -1, beta = -1;
  } p_ad[2];
  if (tr.train_projector) {
    p_proj_w1 = store.add("proj.w1", ParamGroup::up, proj0.w1);
    p_proj_w2 = store.add("proj.w2", ParamGroup::up, proj0.w2);
  }
  if (tr.train_encoder) {
    p_enc_w1 = store.add("enc.w1", ParamGroup::up, ckpt.enc.w1);  // trained copy
    p_enc_w2 = store.add("enc.w2", ParamGroup::up, ckpt.enc.w2);
  }
  if (tr.use_adapters) {
    for (int l = 0; l < 2; ++l) {
      const std::string base = "adapter" + std::to_string(l + 1);
      DenseMatrix beta(1, 1);
      beta.data[0] = adapters0.layer[static_cast<std::size_t>(l)].beta;
      p_ad[l].down = store.add(base + ".down", ParamGroup::up,
                               adapters0.layer[static_cast<std::size_t>(l)].down);
      p_ad[l].up = store.add(base + ".up", ParamGroup::up,
                             adapters0.layer[static_cast<std::size_t>(l)].up);
      p_ad[l].beta = store.add(base + ".beta", ParamGroup::up, std::move(beta));
    }
  }
  if (tr.mode == FusionMode::learnable) {
    DenseMatrix logit(1, 1);
    logit.data[0] = cfg.fusion_logit_init;
    p_logit = store.add("fusion.logit", ParamGroup::up, std::move(logit));
  }
  const int p_cls_w = store.add("cls.w", ParamGroup::down, cls0.w);
  const int p_cls_b = store.add("cls.b", ParamGroup::down, cls0.b);

  std::vector<int> up_members, down_members;
  for (std::size_t i = 0; i < store.size(); ++i)
    (store.at(static_cast<int>(i)).group == ParamGroup::up ? up_members : down_members)
        .push_back(static_cast<int>(i));

  AdamState up_opt(AdamHyper{cfg.up_lr, 0.9, 0.999, 1e-8, cfg.up_wd});
  AdamState down_opt(AdamHyper{cfg.down_lr, 0.9, 0.999, 1e-8, cfg.down_wd});

  AdaptResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<DenseMatrix> best_snapshot = store.snapshot();
  double best_alpha = 0.0;
  int bad_epochs = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    std::vector<int> node_of(store.size());
    for (std::size_t i = 0; i < store.size(); ++i)
      node_of[i] = tape.input(store.at(static_cast<int>(i)).value);

    const int ahat_id = tape.constant(ahat.m);
    const int x_id = tape.constant(target.features);
    const int pw1 = tr.train_projector ? node_of[static_cast<std::size_t>(p_proj_w1)]
                                       : tape.constant(proj0.w1);
    const int pw2 = tr.train_projector ? node_of[static_cast<std::size_t>(p_proj_w2)]
                                       : tape.constant(proj0.w2);
    const int ew1 = tr.train_encoder ? node_of[static_cast<std::size_t>(p_enc_w1)]
                                     : tape.constant(ckpt.enc.w1);
    const int ew2 = tr.train_encoder ? node_of[static_cast<std::size_t>(p_enc_w2)]
                                     : tape.constant(ckpt.enc.w2);

    const int h0 = tape_projector(tape, x_id, pw1, pw2);
    const int h_pre = tape_frozen_branch(tape, ahat_id, h0, ew1, ew2);

    int h_adp = -1;
    if (tr.use_adapters) {
      TapeAdapter a1{node_of[static_cast<std::size_t>(p_ad[0].down)],
                     node_of[static_cast<std::size_t>(p_ad[0].up)],
                     node_of[static_cast<std::size_t>(p_ad[0].beta)]};
      TapeAdapter a2{node_of[static_cast<std::size_t>(p_ad[1].down)],
                     node_of[static_cast<std::size_t>(p_ad[1].up)],
                     node_of[static_cast<std::size_t>(p_ad[1].beta)]};
      h_adp = tape_adapted_branch(tape, ahat_id, h0, ew1, ew2, a1, a2);
    }

    int alpha_node = -1;
    double alpha_value = tr.mode == FusionMode::fixed_zero ? 0.0 : 1.0;
    int head = h_pre;
    if (tr.mode == FusionMode::learnable) {
      alpha_node = tape.sigmoid(node_of[static_cast<std::size_t>(p_logit)]);
      alpha_value = tape.value(alpha_node).data[0];
      head = tape.affine_mix(h_pre, h_adp, alpha_node);
    } else if (tr.mode == FusionMode::fixed_zero) {
      head = h_adp;  // adapted branch only
    }

    const int logits =
        tape_classifier(tape, tape.gather_rows(head, split.train_idx),
                        node_of[static_cast<std::size_t>(p_cls_w)],
                        node_of[static_cast<std::size_t>(p_cls_b)]);
    const int l_cls = tape.softmax_cross_entropy(logits, train_labels);

    int l_ctr = -1;
    if (need_ctr) l_ctr = tape_contrastive_loss(tape, h_pre, h_adp, target, w.tau_ctr);

    int l_fus = -1;
    bool degenerate_mask = false;
    if (need_fus) {
      // Subsampled topology term: similarities on a node batch, O(B²·d).
      std::vector<int> batch(static_cast<std::size_t>(target.num_nodes));
      for (int i = 0; i < target.num_nodes; ++i) batch[static_cast<std::size_t>(i)] = i;
      const int b = w.effective_batch(target.num_nodes);
      if (b < target.num_nodes) {
        Rng brng = Rng::derive(run_seed, {Rng::tag("fusion-batch"),
                                          static_cast<std::uint64_t>(epoch)});
        batch = brng.sample_without_replacement(batch, static_cast<std::size_t>(b));
      }
      const int hb_pre = tape.gather_rows(h_pre, batch);
      const int hb_adp = tape.gather_rows(h_adp, batch);
      const int s_pre = tape_self_similarity(tape, hb_pre);
      const int s_adp = tape_self_similarity(tape, hb_adp);
      int s_mix;
      if (tr.mode == FusionMode::learnable)
        s_mix = tape_mix_similarity(tape, s_pre, s_adp, alpha_node);
      else
        s_mix = tr.mode == FusionMode::fixed_one ? s_pre : s_adp;
      DenseMatrix adj_b(b, b);
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j)
          adj_b.at(i, j) = adj.at(batch[static_cast<std::size_t>(i)],
                                  batch[static_cast<std::size_t>(j)]);
      const DenseMatrix mask =
          consistency_mask(tape.value(s_mix), adj_b, w.threshold_t);
      FusionLossNode fl = tape_fusion_loss(tape, s_mix, adj_b, mask, w.tau_fus);
      l_fus = fl.node;
      degenerate_mask = fl.degenerate;
    }

    int total = l_cls;
    if (need_ctr) total = tape.add(total, tape.scale(l_ctr, w.lambda1));
    if (need_fus) total = tape.add(total, tape.scale(l_fus, w.lambda2));

    LossReport report = total_loss(tape.scalar_value(l_cls),
                                   need_ctr ? tape.scalar_value(l_ctr) : 0.0,
                                   need_fus ? tape.scalar_value(l_fus) : 0.0, w,
                                   degenerate_mask);

    // Per-term gradient norms are diagnostics; computed on the first epoch
    // only (each term needs its own backward pass).
    if (epoch == 0) {
      tape.backward(l_cls);
      report.grad_norm_cls = grad_norm_over(tape, node_of);
      if (need_ctr) {
        tape.backward(l_ctr);
        report.grad_norm_ctr = grad_norm_over(tape, node_of);
      }
      if (need_fus && !degenerate_mask) {
        tape.backward(l_fus);
        report.grad_norm_fus = grad_norm_over(tape, node_of);
      }
    }
    tape.backward(total);

    EpochLog entry{epoch, report, alpha_value, 0.0, 0.0, 0.0};
    if (tr.use_adapters) {
      entry.beta1 = store.at(p_ad[0].beta).value.data[0];
      entry.beta2 = store.at(p_ad[1].beta).value.data[0];
      entry.delta_norm =
          theory::branch_discrepancy_stats(tape.value(h_pre), tape.value(h_adp)).mean_norm;
    }
    result.log.push_back(entry);

    if (report.total < best) {
      best = report.total;
      best_snapshot = store.snapshot();
      best_alpha = alpha_value;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
    }
    result.epochs_ran = epoch + 1;
    if (bad_epochs >= cfg.patience) break;

    // Gradients for parameters the objective never touched stay zero.
    std::vector<DenseMatrix> zero_grads;
    auto grad_of = [&](int store_idx) -> const DenseMatrix* {
      const int node = node_of[static_cast<std::size_t>(store_idx)];
      if (tape.has_grad(node)) return &tape.grad(node);
      zero_grads.emplace_back(store.at(store_idx).value.rows,
                              store.at(store_idx).value.cols);
      return &zero_grads.back();
    };
    zero_grads.reserve(store.size());
    std::vector<DenseMatrix*> up_params, down_params;
    std::vector<const DenseMatrix*> up_grads, down_grads;
    for (int i : up_members) {
      up_params.push_back(&store.at(i).value);
      up_grads.push_back(grad_of(i));
    }
    for (int i : down_members) {
      down_params.push_back(&store.at(i).value);
      down_grads.push_back(grad_of(i));
    }
    up_opt.step(up_params, up_grads);
    down_opt.step(down_params, down_grads);
  }

  store.restore(best_snapshot);
  result.best_loss = best;
  result.final_alpha = best_alpha;
  if (tr.use_adapters) {
    result.final_beta[0] = store.at(p_ad[0].beta).value.data[0];
    result.final_beta[1] = store.at(p_ad[1].beta).value.data[0];
  }

  TrainedModel& m = result.model;
  m.variant = variant;
  m.fusion_mode = tr.mode;
  m.has_adapters = tr.use_adapters;
  m.proj = tr.train_projector
               ? ProjectorParams{store.at(p_proj_w1).value, store.at(p_proj_w2).value}
               : proj0;
  m.enc.w1 = tr.train_encoder ? store.at(p_enc_w1).value : ckpt.enc.w1;
  m.enc.w2 = tr.train_encoder ? store.at(p_enc_w2).value : ckpt.enc.w2;
  m.enc.frozen = true;  // training is over; the snapshot is immutable now
  if (tr.use_adapters) {
    for (int l = 0; l < 2; ++l) {
      auto& layer = m.adapters.layer[static_cast<std::size_t>(l)];
      layer.down = store.at(p_ad[l].down).value;
      layer.up = store.at(p_ad[l].up).value;
      layer.beta = store.at(p_ad[l].beta).value.data[0];
    }
  }
  if (tr.mode == FusionMode::learnable)
    m.fusion.logit = store.at(p_logit).value.data[0];
  m.cls.w = store.at(p_cls_w).value;
  m.cls.b = store.at(p_cls_b).value;
  return result;
}

double evaluate(const TrainedModel& model, const Graph& g, const std::vector<int>& test_idx) {
  if (!g.has_labels()) throw ProtocolError("evaluate: graph has no labels");
  const NormalizedAdjacency ahat = normalize_adjacency(g);

  DenseMatrix head;
  switch (model.fusion_mode) {
    case FusionMode::fixed_one:
      head = encode_frozen(g, ahat, model.enc, model.proj);
      break;
    case FusionMode::fixed_zero:
      head = encode_adapted(g, ahat, model.enc, model.adapters, model.proj);
      break;
    case FusionMode::learnable: {
      BranchOutputs out =
          encode_dual(g, ahat, model.enc, model.adapters, model.proj, model.fusion);
      head = std::move(out.h_mix);
      break;
    }
  }
  DenseMatrix logits = classify(head, model.cls);

  long correct = 0;
  for (int v : test_idx) {
    int pred = 0;
    double bestv = logits.at(v, 0);
    for (int c = 1; c < logits.cols; ++c)
      if (logits.at(v, c) > bestv) {  // strict: ties keep the lowest index
        bestv = logits.at(v, c);
        pred = c;
      }
    if (pred == g.labels[static_cast<std::size_t>(v)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_idx.size());
}

namespace {

std::uint64_t episode_seed(std::uint64_t seed, int sampling, const char* what) {
  return Rng::derive(seed, {Rng::tag(what), static_cast<std::uint64_t>(sampling)}).next_u64();
}

}  // namespace

RunReport run_protocol(const Graph& target, const Checkpoint& ckpt, const TrainConfig& cfg,
                       const std::vector<Variant>& variants) {
  cfg.validate();
  if (variants.empty()) throw UsageError("run_protocol: no variants requested");

  struct Job {
    std::uint64_t seed;
    int sampling;
  };
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds)
    for (int s = 0; s < cfg.samplings; ++s) jobs.push_back(Job{seed, s});

  struct Cell {
    RunRecord record;
    std::vector<TrainLogRow> log;
  };
  std::vector<std::vector<Cell>> grid(jobs.size(), std::vector<Cell>(variants.size()));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size() || failed.load()) return;
      const Job& job = jobs[j];
      try {
        // One split per episode, shared by every variant (paired design).
        FewShotSplit split =
            sample_few_shot(target, cfg.shots, episode_seed(job.seed, job.sampling, "split"));
        const std::uint64_t run_seed = episode_seed(job.seed, job.sampling, "run");
        for (std::size_t v = 0; v < variants.size(); ++v) {
          AdaptResult r = adapt(target, ckpt, cfg, split, variants[v], run_seed);
          const double acc = evaluate(r.model, target, split.test_idx);
          Cell& cell = grid[j][v];
          cell.record = RunRecord{variant_name(variants[v]), job.seed, job.sampling,
                                  acc,      r.epochs_ran, r.final_alpha};
          for (const EpochLog& e : r.log)
            cell.log.push_back(TrainLogRow{variant_name(variants[v]), job.seed, job.sampling,
                                           e.epoch, e.losses.cls, e.losses.ctr, e.losses.fus,
                                           e.losses.total, e.alpha, e.beta1, e.beta2,
                                           e.delta_norm});
        }
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mutex);
        if (!first_error) {
          try {
            throw;
          } catch (const Error& e) {
            first_error = std::make_exception_ptr(Error(
                e.category(), std::string(e.what()) + " (seed=" + std::to_string(job.seed) +
                                  ", sampling=" + std::to_string(job.sampling) + ")"));
          } catch (const std::exception& e) {
            first_error = std::make_exception_ptr(ContractError(
                std::string(e.what()) + " (seed=" + std::to_string(job.seed) +
                ", sampling=" + std::to_string(job.sampling) + ")"));
          }
        }
        failed.store(true);
        return;
      }
    }
  };

  const int nthreads = std::min<int>(cfg.workers, static_cast<int>(jobs.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  RunReport report;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      const Cell& cell = grid[j][v];
      report.records.push_back(cell.record);
      report.epoch_log.insert(report.epoch_log.end(), cell.log.begin(), cell.log.end());
      sum += cell.record.accuracy;
      sumsq += cell.record.accuracy * cell.record.accuracy;
    }
    const double n = static_cast<double>(jobs.size());
    VariantSummary s;
    s.count = static_cast<int>(jobs.size());
    s.mean = sum / n;
    s.stddev = std::sqrt(std::max(0.0, sumsq / n - s.mean * s.mean));
    report.summary[variant_name(variants[v])] = s;
  }
  return report;
}

namespace {
std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void write_results_csv(const RunReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << "variant,seed,sampling,accuracy,epochs_ran,final_alpha\n";
  for (const RunRecord& r : report.records)
    out << r.variant << ',' << r.seed << ',' << r.sampling << ',' << fmt17(r.accuracy) << ','
        << r.epochs_ran << ',' << fmt17(r.final_alpha) << '\n';
}

void write_summary_json(const RunReport& report, const std::string& path) {
  nlohmann::json j;
  for (const auto& [name, s] : report.summary)
    j[name] = {{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << j.dump(2) << '\n';
}

void write_training_log_csv(const RunReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << "variant,seed,sampling,epoch,loss_cls,loss_ctr,loss_fus,loss_total,alpha,"
         "beta1,beta2,branch_delta_norm\n";
  for (const TrainLogRow& r : report.epoch_log)
    out << r.variant << ',' << r.seed << ',' << r.sampling << ',' << r.epoch << ','
        << fmt17(r.cls) << ',' << fmt17(r.ctr) << ',' << fmt17(r.fus) << ','
        << fmt17(r.total) << ',' << fmt17(r.alpha) << ',' << fmt17(r.beta1) << ','
        << fmt17(r.beta2) << ',' << fmt17(r.delta_norm) << '\n';
}

}  // namespace gp2f
