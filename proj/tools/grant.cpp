// grant: generate graphon datasets, train flexible GCNs with or without
// greedy graph selection, evaluate checkpoints and probe the GNTK.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime/numeric error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "grant/grant.hpp"
#include "grant/run_config.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef GRANT_PRESET_DIR
#define GRANT_PRESET_DIR "presets"
#endif

struct CommonFlags {
  std::string config;
  std::string preset;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string policy;
  long long seed = -1;
  int threads = -1;
};

fs::path preset_path(const std::string& name) {
  const char* env = std::getenv("GRANT_PRESET_DIR");
  const fs::path dir = env ? fs::path(env) : fs::path(GRANT_PRESET_DIR);
  fs::path p = dir / (name + ".cfg");
  if (!fs::exists(p)) throw grant::ConfigError("unknown preset '" + name + "' (looked in " + dir.string() + ")");
  return p;
}

grant::RunConfig resolve(const CommonFlags& f) {
  grant::RunConfig cfg;
  if (!f.preset.empty()) cfg.merge_file(preset_path(f.preset));
  if (!f.config.empty()) cfg.merge_file(f.config);
  for (const auto& kv : f.overrides) cfg.set_assignment(kv);
  if (!f.out_dir.empty()) cfg.set("out_dir", f.out_dir);
  if (!f.policy.empty()) cfg.set("policy", f.policy);
  if (f.seed >= 0) cfg.set("seed", std::to_string(f.seed));
  if (f.threads >= 0) cfg.set("threads", std::to_string(f.threads));
  const auto threads = cfg.get_int("threads");
  if (threads < 0) throw grant::ConfigError("threads must be nonnegative");
  grant::set_threads(static_cast<unsigned>(threads));
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool with_policy) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--preset", f.preset, "preset name (presets/<name>.cfg)");
  cmd->add_option("--set", f.overrides, "override, key=value (repeatable)");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--threads", f.threads, "worker threads (0: GRANT_THREADS or 1)");
  if (with_policy) cmd->add_option("--policy", f.policy, "selection policy: none, B or S");
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw grant::Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int cmd_generate(const CommonFlags& flags) {
  auto cfg = resolve(flags);
  const fs::path out = cfg.get("out_dir");
  fs::create_directories(out);
  cfg.write_resolved(out / "resolved.cfg");
  const auto synth = cfg.synth();
  const auto files = grant::generate_dataset(synth, out);
  std::cout << "wrote " << synth.split.train << "/" << synth.split.val << "/" << synth.split.test << " graphs to "
            << out.string() << "\n";
  (void)files;
  return 0;
}

int cmd_train(const CommonFlags& flags) {
  auto cfg = resolve(flags);
  const fs::path out = cfg.get("out_dir");
  fs::create_directories(out);
  // Written first so the resolved settings survive a failed run.
  cfg.write_resolved(out / "resolved.cfg");

  const fs::path data = cfg.get("data_dir");
  const auto train_ds = grant::load_dataset(data / "train.jsonl");
  const auto val_path = data / "val.jsonl";
  grant::Dataset val_ds;
  if (fs::exists(val_path)) val_ds = grant::load_dataset(val_path);
  if (train_ds.empty()) throw grant::ConfigError("training set " + (data / "train.jsonl").string() + " is empty");

  const auto tc = cfg.trainer(train_ds.task);
  const auto policy = cfg.policy(train_ds.task);
  const auto spec = cfg.layer_spec(train_ds.d, train_ds.c, train_ds.task);
  const auto every = cfg.get_int("checkpoint_every");
  const fs::path ck_dir = out / "checkpoints";
  if (every > 0) fs::create_directories(ck_dir);

  auto on_epoch = [&](const grant::EpochRecord& rec, const grant::GcnParams& params) {
    if (every > 0 && (rec.epoch + 1) % every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%05d.json", rec.epoch + 1);
      grant::save_checkpoint({spec, params, rec.epoch + 1}, ck_dir / name);
    }
  };
  const auto init = grant::init_params(spec, tc.seed, tc.init_scale);
  if (every > 0) grant::save_checkpoint({spec, init, 0}, ck_dir / "epoch_00000.json");
  auto result = grant::train(tc, spec, init, train_ds, val_ds, policy, on_epoch);

  grant::write_log_csv(result.log, out / "log.csv");
  {
    std::ofstream sel(out / "selections.jsonl");
    for (const auto& ev : result.log.selections) sel << grant::selection_event_json(ev).dump() << '\n';
  }
  grant::save_checkpoint({spec, result.params, static_cast<long>(result.log.epochs.size())}, out / "final.json");
  auto summary = grant::log_summary(result.log);
  summary["policy"] = cfg.get("policy");
  summary["task"] = std::string(grant::to_string(train_ds.task));
  summary["param_count"] = spec.param_count();
  if (!val_ds.empty()) summary["val"] = grant::evaluate(result.params, spec, val_ds, tc.loss).to_json();
  write_json(out / "summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::string& out_file) {
  const auto ck = grant::load_checkpoint(checkpoint);
  const auto ds = grant::load_dataset(dataset);
  const auto report = grant::evaluate(ck.params, ck.spec, ds, grant::default_loss(ds.task)).to_json();
  if (!out_file.empty()) write_json(out_file, report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_gntk(const std::vector<std::string>& checkpoints, const std::string& dataset, long long probe_size,
             const std::string& out_dir) {
  const auto ds = grant::load_dataset(dataset);
  const std::size_t n = probe_size > 0 ? std::min<std::size_t>(static_cast<std::size_t>(probe_size), ds.size()) : ds.size();
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  const auto probe = ds.subset(ids);
  fs::create_directories(out_dir);

  std::vector<grant::KernelMatrix> kernels;
  nlohmann::json report;
  report["probe_size"] = n;
  report["kernels"] = nlohmann::json::array();
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const auto ck = grant::load_checkpoint(checkpoints[i]);
    auto k = grant::gntk_matrix(ck.params, ck.spec, probe.graphs, ids);
    const std::string stem = "kernel_" + std::to_string(i);
    grant::write_kernel_csv(k, fs::path(out_dir) / (stem + ".csv"));
    grant::save_kernel_binary(k, fs::path(out_dir) / (stem + ".bin"));
    report["kernels"].push_back({{"checkpoint", checkpoints[i]},
                                 {"theta_tag", k.theta_tag},
                                 {"csv", stem + ".csv"},
                                 {"min_eigenvalue", grant::min_eigenvalue(k)},
                                 {"max_diagonal", k.entries.diagonal().maxCoeff()}});
    kernels.push_back(std::move(k));
  }
  if (kernels.size() >= 2) {
    nlohmann::json drift = nlohmann::json::array();
    for (std::size_t i = 1; i < kernels.size(); ++i) drift.push_back(grant::kernel_drift(kernels[i], kernels[i - 1]));
    report["drift"] = drift;
    const double first = drift.front().get<double>();
    report["final_over_first"] = first > 0 ? nlohmann::json(drift.back().get<double>() / first) : nlohmann::json(nullptr);
  }
  write_json(fs::path(out_dir) / "gntk.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grant: flexible GCN training with greedy graph selection"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags;
  auto* gen = app.add_subcommand("generate", "generate a synthetic graphon dataset");
  add_common(gen, gen_flags, false);
  auto* tr = app.add_subcommand("train", "train a flexible GCN");
  add_common(tr, train_flags, true);

  std::string eval_ck, eval_ds, eval_out;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  ev->add_option("--checkpoint", eval_ck, "checkpoint file")->required();
  ev->add_option("--dataset", eval_ds, "dataset .jsonl")->required();
  ev->add_option("--out", eval_out, "also write the report here");

  std::vector<std::string> gntk_cks;
  std::string gntk_ds, gntk_out = "gntk";
  long long probe_size = 64;
  int gntk_threads = -1;
  auto* gk = app.add_subcommand("gntk", "GNTK matrices and drift for checkpoints on a probe set");
  gk->add_option("--checkpoint", gntk_cks, "checkpoint file(s), in training order")->required();
  gk->add_option("--dataset", gntk_ds, "probe dataset .jsonl")->required();
  gk->add_option("--probe-size", probe_size, "number of leading graphs used as probe (0: all)");
  gk->add_option("--out-dir", gntk_out, "output directory");
  gk->add_option("--threads", gntk_threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_flags);
    if (tr->parsed()) return cmd_train(train_flags);
    if (ev->parsed()) return cmd_eval(eval_ck, eval_ds, eval_out);
    if (gk->parsed()) {
      if (gntk_threads >= 0) grant::set_threads(static_cast<unsigned>(gntk_threads));
      return cmd_gntk(gntk_cks, gntk_ds, probe_size, gntk_out);
    }
  } catch (const grant::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
