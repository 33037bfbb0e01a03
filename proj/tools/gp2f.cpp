// gp2f command-line tool: dataset generation, pre-training, downstream
// adaptation (with ablations and baselines) and the estimator-fusion theory
// checks. Every command writes a manifest.json describing exactly how its
// outputs were produced.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "gp2f/error.hpp"
#include "gp2f/graph.hpp"
#include "gp2f/model.hpp"
#include "gp2f/pretrain.hpp"
#include "gp2f/theory.hpp"
#include "gp2f/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gp2f;

namespace {

constexpr const char* kVersion = "gp2f 0.1.0";

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return 2;
    case ErrorCategory::ingestion: return 3;
    case ErrorCategory::numeric: return 4;
    case ErrorCategory::assumption: return 5;
    case ErrorCategory::internal: return 70;
  }
  return 70;
}

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open input for digest: " + path);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  char buf[8192];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ULL;
    }
    if (!in) break;
  }
  char out[32];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

void require_keys(const json& j, std::initializer_list<const char*> known,
                  const std::string& what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) throw ConfigError(what + ": unknown key '" + it.key() + "'");
  }
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

struct ManifestWriter {
  json doc;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  ManifestWriter(const std::string& command, const json& resolved_config) {
    doc["command"] = command;
    doc["version"] = kVersion;
    doc["config"] = resolved_config;
    doc["inputs"] = json::object();
    doc["outputs"] = json::array();
  }
  void input(const std::string& path) { doc["inputs"][path] = fnv1a_file(path); }
  void output(const std::string& name) { doc["outputs"].push_back(name); }
  void write(const fs::path& out_dir) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    doc["wall_clock_sec"] = secs;
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw ValidationError("cannot write manifest in " + out_dir.string());
    out << doc.dump(2) << '\n';
  }
};

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

std::string data_root_default() {
  const char* env = std::getenv("GP2F_DATA_DIR");
  return env ? env : "";
}

// ---- config parsing (field-for-field, unknown keys rejected) ----

SbmSpec sbm_from_json(const json& j, const std::string& what) {
  require_keys(j,
               {"blocks", "nodes_per_block", "p_in", "p_out", "feature_dim", "center_scale",
                "noise_scale", "feature_shift"},
               what);
  SbmSpec s;
  try {
    s.blocks = j.at("blocks").get<int>();
    s.nodes_per_block = j.at("nodes_per_block").get<int>();
    s.p_in = j.at("p_in").get<double>();
    s.p_out = j.at("p_out").get<double>();
    s.feature_dim = j.at("feature_dim").get<int>();
    if (j.contains("center_scale")) s.center_scale = j.at("center_scale").get<double>();
    if (j.contains("noise_scale")) s.noise_scale = j.at("noise_scale").get<double>();
    if (j.contains("feature_shift"))
      s.feature_shift = j.at("feature_shift").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
  s.validate();
  return s;
}

json sbm_to_json(const SbmSpec& s) {
  json j{{"blocks", s.blocks},          {"nodes_per_block", s.nodes_per_block},
         {"p_in", s.p_in},              {"p_out", s.p_out},
         {"feature_dim", s.feature_dim}, {"center_scale", s.center_scale},
         {"noise_scale", s.noise_scale}};
  if (!s.feature_shift.empty()) j["feature_shift"] = s.feature_shift;
  return j;
}

PretrainConfig pretrain_from_json(const json& j) {
  require_keys(j,
               {"epochs", "lr", "weight_decay", "tau_pre", "p_edge_drop_view1",
                "p_feat_mask_view1", "p_edge_drop_view2", "p_feat_mask_view2", "hidden_dim",
                "seed"},
               "pretrain config");
  PretrainConfig c;
  try {
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("tau_pre")) c.tau_pre = j.at("tau_pre").get<double>();
    if (j.contains("p_edge_drop_view1")) c.p_edge_drop_view1 = j.at("p_edge_drop_view1").get<double>();
    if (j.contains("p_feat_mask_view1")) c.p_feat_mask_view1 = j.at("p_feat_mask_view1").get<double>();
    if (j.contains("p_edge_drop_view2")) c.p_edge_drop_view2 = j.at("p_edge_drop_view2").get<double>();
    if (j.contains("p_feat_mask_view2")) c.p_feat_mask_view2 = j.at("p_feat_mask_view2").get<double>();
    if (j.contains("hidden_dim")) c.hidden_dim = j.at("hidden_dim").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pretrain config: ") + e.what());
  }
  c.validate();
  return c;
}

json pretrain_to_json(const PretrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"lr", c.lr},
              {"weight_decay", c.weight_decay},
              {"tau_pre", c.tau_pre},
              {"p_edge_drop_view1", c.p_edge_drop_view1},
              {"p_feat_mask_view1", c.p_feat_mask_view1},
              {"p_edge_drop_view2", c.p_edge_drop_view2},
              {"p_feat_mask_view2", c.p_feat_mask_view2},
              {"hidden_dim", c.hidden_dim},
              {"seed", c.seed}};
}

TrainConfig train_from_json(const json& j) {
  require_keys(j,
               {"epochs", "patience", "up_lr", "down_lr", "up_wd", "down_wd", "lambda1",
                "lambda2", "tau_ctr", "tau_fus", "threshold_t", "batch_size", "shots",
                "seeds", "samplings", "adapter_rank", "beta_init", "fusion_logit_init",
                "fixed_alpha", "reinit_projector"},
               "train config");
  TrainConfig c;
  try {
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("patience")) c.patience = j.at("patience").get<int>();
    if (j.contains("up_lr")) c.up_lr = j.at("up_lr").get<double>();
    if (j.contains("down_lr")) c.down_lr = j.at("down_lr").get<double>();
    if (j.contains("up_wd")) c.up_wd = j.at("up_wd").get<double>();
    if (j.contains("down_wd")) c.down_wd = j.at("down_wd").get<double>();
    if (j.contains("lambda1")) c.weights.lambda1 = j.at("lambda1").get<double>();
    if (j.contains("lambda2")) c.weights.lambda2 = j.at("lambda2").get<double>();
    if (j.contains("tau_ctr")) c.weights.tau_ctr = j.at("tau_ctr").get<double>();
    if (j.contains("tau_fus")) c.weights.tau_fus = j.at("tau_fus").get<double>();
    if (j.contains("threshold_t")) c.weights.threshold_t = j.at("threshold_t").get<double>();
    if (j.contains("batch_size")) c.weights.batch_size = j.at("batch_size").get<int>();
    if (j.contains("shots")) c.shots = j.at("shots").get<int>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("samplings")) c.samplings = j.at("samplings").get<int>();
    if (j.contains("adapter_rank")) c.adapter_rank = j.at("adapter_rank").get<int>();
    if (j.contains("beta_init")) c.beta_init = j.at("beta_init").get<double>();
    if (j.contains("fusion_logit_init"))
      c.fusion_logit_init = j.at("fusion_logit_init").get<double>();
    if (j.contains("fixed_alpha") && !j.at("fixed_alpha").is_null()) {
      const int v = j.at("fixed_alpha").get<int>();
      if (v != 0 && v != 1) throw ConfigError("train config: fixed_alpha must be 0 or 1");
      c.fusion_override = v == 0 ? FusionOverride::zero : FusionOverride::one;
    }
    if (j.contains("reinit_projector"))
      c.reinit_projector = j.at("reinit_projector").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

json train_to_json(const TrainConfig& c) {
  json j{{"epochs", c.epochs},
         {"patience", c.patience},
         {"up_lr", c.up_lr},
         {"down_lr", c.down_lr},
         {"up_wd", c.up_wd},
         {"down_wd", c.down_wd},
         {"lambda1", c.weights.lambda1},
         {"lambda2", c.weights.lambda2},
         {"tau_ctr", c.weights.tau_ctr},
         {"tau_fus", c.weights.tau_fus},
         {"threshold_t", c.weights.threshold_t},
         {"batch_size", c.weights.batch_size},
         {"shots", c.shots},
         {"seeds", c.seeds},
         {"samplings", c.samplings},
         {"adapter_rank", c.adapter_rank},
         {"beta_init", c.beta_init},
         {"fusion_logit_init", c.fusion_logit_init},
         {"reinit_projector", c.reinit_projector}};
  if (c.fusion_override != FusionOverride::none)
    j["fixed_alpha"] = c.fusion_override == FusionOverride::zero ? 0 : 1;
  return j;
}

Graph load_graph_dir(const std::string& dir, ManifestWriter* manifest) {
  const fs::path d(dir);
  const std::string f = (d / "features.txt").string();
  const std::string e = (d / "edges.txt").string();
  const std::string l = (d / "labels.txt").string();
  std::optional<std::string> labels;
  if (fs::exists(l)) labels = l;
  if (manifest) {
    manifest->input(f);
    manifest->input(e);
    if (labels) manifest->input(*labels);
  }
  return load_graph(f, e, labels);
}

// ---- subcommands ----

int cmd_gen(const std::string& config_path, const std::string& out, std::uint64_t seed) {
  json spec = load_json(config_path);
  require_keys(spec, {"source", "target"}, "gen spec");
  SbmSpec source = sbm_from_json(spec.at("source"), "gen spec.source");
  SbmSpec target = sbm_from_json(spec.at("target"), "gen spec.target");

  fs::path dir = ensure_out_dir(out);
  ManifestWriter manifest(
      "gen", json{{"source", sbm_to_json(source)}, {"target", sbm_to_json(target)},
                  {"seed", seed}});
  manifest.input(config_path);

  auto [sg, tg] = generate_sbm_pair(source, target, seed);
  for (const auto& [name, g] : {std::pair<const char*, const Graph&>{"source", sg},
                                {"target", tg}}) {
    fs::path sub = dir / name;
    fs::create_directories(sub);
    save_graph(g, (sub / "features.txt").string(), (sub / "edges.txt").string(),
               (sub / "labels.txt").string());
    manifest.output(std::string(name) + "/features.txt");
    manifest.output(std::string(name) + "/edges.txt");
    manifest.output(std::string(name) + "/labels.txt");
  }
  manifest.write(dir);
  std::cout << "wrote source (" << sg.num_nodes << " nodes) and target (" << tg.num_nodes
            << " nodes) to " << dir.string() << "\n";
  return 0;
}

int cmd_pretrain(const std::string& data, const std::string& config_path,
                 const std::string& out, std::optional<std::uint64_t> seed_override) {
  PretrainConfig cfg =
      config_path.empty() ? PretrainConfig{} : pretrain_from_json(load_json(config_path));
  if (seed_override) cfg.seed = *seed_override;

  fs::path dir = ensure_out_dir(out);
  ManifestWriter manifest("pretrain", pretrain_to_json(cfg));
  if (!config_path.empty()) manifest.input(config_path);
  Graph source = load_graph_dir(data, &manifest);

  PretrainResult result = grace_pretrain(source, cfg);

  const std::string ckpt_path = (dir / "checkpoint.json").string();
  save_checkpoint(result.checkpoint, ckpt_path);
  manifest.output("checkpoint.json");
  {
    std::ofstream csv(dir / "pretrain_loss.csv");
    csv << "epoch,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < result.epoch_losses.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", result.epoch_losses[i]);
      csv << i << ',' << buf << '\n';
    }
    manifest.output("pretrain_loss.csv");
  }
  manifest.write(dir);
  std::cout << "pre-trained " << cfg.epochs << " epochs; final loss "
            << result.epoch_losses.back() << "; checkpoint at " << ckpt_path << "\n";
  return 0;
}

int cmd_adapt(const std::string& checkpoint, const std::string& data,
              const std::string& config_path, const std::string& variant_csv,
              const std::string& out, int workers,
              std::optional<std::uint64_t> seed_override) {
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : train_from_json(load_json(config_path));
  cfg.workers = workers;
  if (seed_override) cfg.seeds = {*seed_override};

  std::vector<Variant> variants;
  {
    std::string token;
    std::istringstream ss(variant_csv);
    while (std::getline(ss, token, ','))
      if (!token.empty()) variants.push_back(parse_variant(token));
  }
  if (variants.empty()) throw UsageError("adapt: --variant must name at least one variant");

  fs::path dir = ensure_out_dir(out);
  json cfg_json = train_to_json(cfg);
  cfg_json["variants"] = json::array();
  for (Variant v : variants) cfg_json["variants"].push_back(variant_name(v));
  cfg_json["workers"] = workers;
  ManifestWriter manifest("adapt", cfg_json);
  if (!config_path.empty()) manifest.input(config_path);
  manifest.input(checkpoint);

  Checkpoint ckpt = load_checkpoint(checkpoint);
  Graph target = load_graph_dir(data, &manifest);

  RunReport report = run_protocol(target, ckpt, cfg, variants);
  write_results_csv(report, (dir / "results.csv").string());
  write_summary_json(report, (dir / "summary.json").string());
  write_training_log_csv(report, (dir / "training_log.csv").string());
  manifest.output("results.csv");
  manifest.output("summary.json");
  manifest.output("training_log.csv");
  manifest.write(dir);

  for (const auto& [name, s] : report.summary)
    std::cout << name << ": mean " << s.mean << " +/- " << s.stddev << " over " << s.count
              << " runs\n";
  return 0;
}

int cmd_theory(const std::string& config_path, const std::string& out,
               std::optional<std::uint64_t> seed_override) {
  json j = config_path.empty() ? json::object() : load_json(config_path);
  require_keys(j,
               {"sigma_g2", "sigma_a2", "rho", "dim", "n_samples", "seed", "grid_points",
                "corollary_problems", "corollary_samples"},
               "theory config");
  theory::ErrorStats stats;
  int dim = 8;
  long n_samples = 200000;
  std::uint64_t seed = 0;
  int grid_points = 11;
  int corollary_problems = 10;
  long corollary_samples = 20000;
  try {
    if (j.contains("sigma_g2")) stats.sigma_g2 = j.at("sigma_g2").get<double>();
    if (j.contains("sigma_a2")) stats.sigma_a2 = j.at("sigma_a2").get<double>();
    if (j.contains("rho")) stats.rho = j.at("rho").get<double>();
    if (j.contains("dim")) dim = j.at("dim").get<int>();
    if (j.contains("n_samples")) n_samples = j.at("n_samples").get<long>();
    if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("grid_points")) grid_points = j.at("grid_points").get<int>();
    if (j.contains("corollary_problems"))
      corollary_problems = j.at("corollary_problems").get<int>();
    if (j.contains("corollary_samples"))
      corollary_samples = j.at("corollary_samples").get<long>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("theory config: ") + e.what());
  }
  if (seed_override) seed = *seed_override;
  if (grid_points < 2) throw ConfigError("theory config: grid_points must be >= 2");

  fs::path dir = ensure_out_dir(out);
  ManifestWriter manifest("theory", json{{"sigma_g2", stats.sigma_g2},
                                         {"sigma_a2", stats.sigma_a2},
                                         {"rho", stats.rho},
                                         {"dim", dim},
                                         {"n_samples", n_samples},
                                         {"seed", seed},
                                         {"grid_points", grid_points},
                                         {"corollary_problems", corollary_problems},
                                         {"corollary_samples", corollary_samples}});
  if (!config_path.empty()) manifest.input(config_path);

  json verdict;
  verdict["stats"] = {{"sigma_g2", stats.sigma_g2}, {"sigma_a2", stats.sigma_a2},
                      {"rho", stats.rho}};

  std::string why;
  const bool applicable = stats.valid(&why);
  if (applicable) {
    theory::NoiseModel model{dim, stats, seed};
    {
      std::ofstream csv(dir / "sweep.csv");
      csv << "lambda,analytic_mse,empirical_mse,stderr\n";
      char buf[256];
      for (int i = 0; i < grid_points; ++i) {
        const double lambda = static_cast<double>(i) / (grid_points - 1);
        auto mc = theory::monte_carlo_mse(model, lambda, n_samples);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", lambda,
                      theory::mse_curve(stats, lambda), mc.mean, mc.stderr_);
        csv << buf;
      }
      manifest.output("sweep.csv");
    }
    auto rep = theory::verify_improvement(stats, dim, seed, n_samples);
    verdict["theorem1"] = {
        {"applicable", rep.applicable},
        {"verdict", rep.verdict},
        {"lambda_star", rep.lambda_star},
        {"analytic_mse_at_star", rep.analytic_at_star},
        {"empirical_mse_at_star", rep.at_star.mean},
        {"empirical_mse_at_zero", rep.at_zero.mean},
        {"empirical_mse_at_one", rep.at_one.mean},
    };

    // Margin-bound validation across random problems and the λ grid.
    bool all_hold = true;
    double max_ratio = 0.0;
    Rng prng = Rng::derive(seed, {Rng::tag("corollary")});
    for (int p = 0; p < corollary_problems; ++p) {
      const int classes = 2 + static_cast<int>(prng.next_below(4));
      const int pdim = 2 + static_cast<int>(prng.next_below(15));
      auto problem =
          theory::generate_margin_problem(classes, pdim, 12, 1.0, prng.next_u64());
      theory::NoiseModel pmodel{pdim, stats, prng.next_u64()};
      for (int i = 0; i < grid_points; ++i) {
        const double lambda = static_cast<double>(i) / (grid_points - 1);
        const double rate = theory::empirical_misclassification(
            problem, pmodel, lambda, corollary_samples, prng.next_u64());
        const double bound =
            theory::misclassification_bound(problem, theory::mse_curve(stats, lambda))
                .unclamped;
        if (rate > bound) all_hold = false;
        if (bound > 0.0) max_ratio = std::max(max_ratio, rate / bound);
      }
    }
    verdict["corollary1"] = {{"problems", corollary_problems},
                             {"bound_holds_everywhere", all_hold},
                             {"max_rate_to_bound_ratio", max_ratio}};
  } else {
    verdict["theorem1"] = {{"applicable", false},
                           {"verdict", nullptr},
                           {"reason", "assumptions violated, theorem inapplicable: " + why}};
  }

  {
    std::ofstream vj(dir / "verdict.json");
    vj << verdict.dump(2) << '\n';
    manifest.output("verdict.json");
  }
  manifest.write(dir);
  std::cout << verdict.dump(2) << "\n";
  if (!applicable)
    throw AssumptionError("theory: " + why);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP2F: dual-branch graph prompt learning with estimator-fusion theory checks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir = data_root_default(), checkpoint_path;
  std::string variant = "full";
  int workers = 1;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config_path, "JSON config file");
    auto* o = sub->add_option("--out", out_dir, "output directory");
    if (needs_out) o->required();
    sub->add_option("--seed", seed, "seed override");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic source/target dataset pair");
  add_common(gen, true);
  gen->get_option("--config")->required();

  CLI::App* pretrain = app.add_subcommand("pretrain", "self-supervised encoder pre-training");
  add_common(pretrain, true);
  pretrain->add_option("--data", data_dir, "graph directory (features/edges/labels)");

  CLI::App* adapt = app.add_subcommand("adapt", "downstream adaptation, ablations, baselines");
  add_common(adapt, true);
  adapt->add_option("--data", data_dir, "target graph directory");
  adapt->add_option("--checkpoint", checkpoint_path, "pre-trained checkpoint")->required();
  adapt->add_option("--variant", variant,
                    "comma list: full,no_ctr,no_fus,no_both,prompt_only,lp,ft");
  adapt->add_option("--workers", workers, "parallel episodes (1 = fully sequential)");

  CLI::App* theory_cmd = app.add_subcommand("theory", "estimator-fusion theory verification");
  add_common(theory_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(config_path, out_dir, seed.value_or(0));
    if (pretrain->parsed()) {
      if (data_dir.empty())
        throw UsageError("pretrain: --data or GP2F_DATA_DIR must point at a graph directory");
      return cmd_pretrain(data_dir, config_path, out_dir, seed);
    }
    if (adapt->parsed()) {
      if (data_dir.empty())
        throw UsageError("adapt: --data or GP2F_DATA_DIR must point at a graph directory");
      return cmd_adapt(checkpoint_path, data_dir, config_path, variant, out_dir, workers, seed);
    }
    if (theory_cmd->parsed()) return cmd_theory(config_path, out_dir, seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 70;
  }
  return 0;
}
