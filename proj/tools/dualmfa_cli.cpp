// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "dualmfa/checkpoint.hpp"
#include "dualmfa/config.hpp"
#include "dualmfa/dataset.hpp"
#include "dualmfa/dump.hpp"
#include "dualmfa/error.hpp"
#include "dualmfa/model.hpp"
#include "dualmfa/trainer.hpp"

namespace {

using namespace dualmfa;

void print_report(const EvalReport& report) {
  std::printf("overall accuracy: %.4f (%zu samples)\n", report.overall(), report.count());
  for (const auto& [type, stats] : report.per_type) {
    std::printf("  %-10s %.4f (%zu samples)\n", type.c_str(), stats.accuracy(), stats.count);
  }
}

int run_gen(const std::string& out_dir, std::size_t count, std::uint64_t seed,
            const std::string& config_path) {
  ModelConfig mcfg = ModelConfig::desk();
  TrainConfig tcfg = TrainConfig::desk();
  if (!config_path.empty()) load_config_file(config_path, mcfg, tcfg);
  Dataset data = generate_planted(count, mcfg, PlantedGenConfig{}, seed);
  write_dataset(out_dir, data);
  std::printf("wrote %zu samples to %s\n", data.size(), out_dir.c_str());
  return 0;
}

int run_train(const std::string& data_dir, std::size_t synthetic, const std::string& config_path,
              const std::string& out_path, const std::string& trace_path,
              const std::string& val_dir, std::size_t iters, std::size_t batch, double lr,
              double dropout, std::uint64_t seed) {
  ModelConfig mcfg = ModelConfig::desk();
  TrainConfig tcfg = TrainConfig::desk();
  if (!config_path.empty()) load_config_file(config_path, mcfg, tcfg);
  if (iters) tcfg.max_iterations = iters;
  if (batch) tcfg.batch_size = batch;
  if (lr > 0) tcfg.learning_rate = lr;
  if (dropout >= 0) tcfg.dropout_rate = dropout;
  tcfg.seed = seed;

  Dataset train_data;
  if (synthetic) {
    train_data = generate_planted(synthetic, mcfg, PlantedGenConfig{}, seed);
  } else {
    train_data = read_dataset(data_dir, &mcfg);
  }
  Dataset val_data;
  const Dataset* validation = &train_data;
  if (!val_dir.empty()) {
    val_data = read_dataset(val_dir, &mcfg);
    validation = &val_data;
  }

  DualMfaModel model(mcfg);
  model.init_params(seed);
  TrainResult result = train(model, train_data, validation, tcfg);

  for (const ValidationEntry& v : result.validation_trace) {
    std::printf("iter %zu: validation accuracy %.4f\n", v.iteration, v.accuracy);
  }
  std::printf("finished after %zu iterations (best validation %.4f)\n", result.iterations_run,
              result.best_validation_accuracy);

  if (!trace_path.empty()) {
    std::ofstream tf(trace_path, std::ios::binary);
    if (!tf) throw data_error("cannot write trace: " + trace_path);
    char buf[64];
    for (const TraceEntry& e : result.loss_trace) {
      std::snprintf(buf, sizeof(buf), "%zu\t%.17g\n", e.iteration, e.loss);
      tf << buf;
    }
  }
  if (!out_path.empty()) {
    save_checkpoint(out_path, model, tcfg);
    std::printf("checkpoint written to %s\n", out_path.c_str());
  }
  if (result.status == TrainStatus::Aborted) {
    std::fprintf(stderr, "training aborted: %s\n", result.abort_reason.c_str());
    return 1;
  }
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  DualMfaModel model = model_from_checkpoint(ckpt);
  Dataset data = read_dataset(data_dir, &model.config());
  print_report(evaluate(model, data));
  return 0;
}

int run_attend_dump(const std::string& ckpt_path, const std::string& data_dir,
                    const std::string& out_dir) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  DualMfaModel model = model_from_checkpoint(ckpt);
  Dataset data = read_dataset(data_dir, &model.config());
  write_attention_dump(out_dir, model, data);
  std::printf("wrote attention records for %zu samples to %s\n", data.size(), out_dir.c_str());
  return 0;
}

int run_gradcheck(std::uint64_t seed, double h) {
  ModelConfig cfg = ModelConfig::tiny();
  DualMfaModel model(cfg);
  model.init_params(seed);
  std::mt19937_64 rng(seed + 1);
  VqaInstance inst = random_instance(cfg, rng);
  const std::size_t target = std::uniform_int_distribution<std::size_t>(0, cfg.n_answers - 1)(rng);
  const double max_rel = model_gradient_check(model, inst, target, h);
  std::printf("max relative error: %.3e\n", max_rel);
  return max_rel < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-branch co-attention VQA model"};
  app.require_subcommand(1);

  std::string out_dir, config_path, data_dir, out_path = "model.ckpt", trace_path, val_dir;
  std::string ckpt_path;
  std::size_t count = 1000, synthetic = 0, iters = 0, batch = 0;
  double lr = 0.0, dropout = -1.0, h = 1e-6;
  std::uint64_t seed = 0;

  CLI::App* gen = app.add_subcommand("gen", "emit a planted synthetic dataset");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--count", count, "number of samples");
  gen->add_option("--seed", seed, "rng seed");
  gen->add_option("--config", config_path, "config file (key=value)");

  CLI::App* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--data", data_dir, "dataset directory");
  tr->add_option("--synthetic", synthetic, "generate N planted samples instead of reading files");
  tr->add_option("--config", config_path, "config file (key=value)");
  tr->add_option("--out", out_path, "checkpoint output path");
  tr->add_option("--trace", trace_path, "write the loss trace to this file");
  tr->add_option("--val-data", val_dir, "validation dataset directory");
  tr->add_option("--iters", iters, "override max iterations");
  tr->add_option("--batch", batch, "override batch size");
  tr->add_option("--lr", lr, "override learning rate");
  tr->add_option("--dropout", dropout, "override dropout rate");
  tr->add_option("--seed", seed, "rng seed");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();

  CLI::App* ad = app.add_subcommand("attend-dump", "export attention weights and graymaps");
  ad->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  ad->add_option("--data", data_dir, "dataset directory")->required();
  ad->add_option("--out", out_dir, "output directory")->required();

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference sweep on a tiny model");
  gc->add_option("--seed", seed, "rng seed");
  gc->add_option("--step", h, "finite-difference step");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen(out_dir, count, seed, config_path);
    if (tr->parsed()) {
      if ((data_dir.empty() && synthetic == 0) || (!data_dir.empty() && synthetic != 0)) {
        std::fprintf(stderr, "error: pass exactly one of --data or --synthetic\n");
        return 2;
      }
      return run_train(data_dir, synthetic, config_path, out_path, trace_path, val_dir, iters,
                       batch, lr, dropout, seed);
    }
    if (ev->parsed()) return run_eval(ckpt_path, data_dir);
    if (ad->parsed()) return run_attend_dump(ckpt_path, data_dir, out_dir);
    if (gc->parsed()) return run_gradcheck(seed, h);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
