#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hygnn/checkpoint.hpp"
#include "hygnn/config.hpp"
#include "hygnn/data.hpp"
#include "hygnn/gradcheck.hpp"
#include "hygnn/train.hpp"

namespace fs = std::filesystem;
using namespace hygnn;

namespace {

enum Exit : int { ok = 0, usage = 1, data_error = 2, numerical_failure = 3 };

int run_synth(std::uint64_t seed, std::size_t n, const fs::path& out, const SynthConfig& cfg) {
  fs::create_directories(out);
  for (std::size_t i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05zu", i);
    save_scene(synth_scene(seed + i, cfg), out / name);
  }
  std::cout << "wrote " << n << " scenes to " << out.string() << '\n';
  return ok;
}

int run_train(const std::optional<fs::path>& config_path, const std::optional<fs::path>& resume,
              const fs::path& data, const fs::path& out) {
  auto scenes = load_dataset(data);
  if (scenes.empty()) throw DataError(DataError::Kind::io, "no scenes in " + data.string());

  std::optional<Trainer> trainer;
  if (resume) {
    trainer.emplace(load_checkpoint(*resume), std::move(scenes));
  } else {
    trainer.emplace(load_config(*config_path), std::move(scenes));
  }
  const auto& cfg = trainer->config();
  std::cout << "parameters " << trainer->model().parameter_count() << ", scenes "
            << trainer->dataset_size() << ", steps " << trainer->steps_done() << "/" << cfg.iterations
            << '\n';
  while (trainer->steps_done() < cfg.iterations) {
    const auto rec = trainer->step();
    std::cout << "step " << rec.step << " loss " << rec.total << " density " << rec.density
              << " localization " << rec.localization << '\n';
    if (cfg.checkpoint_every && rec.step % cfg.checkpoint_every == 0) {
      save_checkpoint(trainer->checkpoint(), out.string() + ".step" + std::to_string(rec.step));
    }
  }
  save_checkpoint(trainer->checkpoint(), out);
  std::cout << "saved " << out.string() << '\n';
  return ok;
}

int run_eval(const fs::path& ckpt, const fs::path& data) {
  const auto model = model_from_checkpoint(load_checkpoint(ckpt));
  const auto scenes = load_dataset(data);
  if (scenes.empty()) throw DataError(DataError::Kind::io, "no scenes in " + data.string());
  const auto r = evaluate(model, scenes);
  for (std::size_t i = 0; i < r.predicted.size(); ++i) {
    std::cout << "image " << i << " predicted " << r.predicted[i] << " ground_truth " << r.ground_truth[i]
              << '\n';
  }
  std::cout << "MAE " << r.mae << " MSE " << r.mse << '\n';
  return ok;
}

int run_infer(const fs::path& ckpt, const fs::path& image, const fs::path& prefix) {
  const auto model = model_from_checkpoint(load_checkpoint(ckpt));
  const auto r = infer_export(model, read_ppm(image), prefix);
  std::cout << "count " << r.count << '\n';
  return ok;
}

int run_gradcheck(bool full) {
  const auto opts = full ? GradCheckOptions::full() : GradCheckOptions{};
  const auto report = grad_check(opts);
  print_report(std::cout, report);
  return report.passed() ? ok : numerical_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid graph network for joint crowd counting and localization"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::size_t count = 0;
  fs::path synth_out;
  SynthConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated dataset");
  synth->add_option("--seed", seed, "Seed of the first scene")->required();
  synth->add_option("--n", count, "Number of scenes")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--height", synth_cfg.height, "Scene height in pixels (multiple of 8)");
  synth->add_option("--width", synth_cfg.width, "Scene width in pixels (multiple of 8)");

  std::optional<fs::path> config_path, resume;
  fs::path data, train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  auto* config_opt = train_cmd->add_option("--config", config_path, "key = value config file");
  auto* resume_opt = train_cmd->add_option("--resume", resume, "Checkpoint to continue from");
  config_opt->excludes(resume_opt);
  train_cmd->add_option("--data", data, "Dataset directory")->required();
  train_cmd->add_option("--out", train_out, "Output checkpoint")->required();

  fs::path ckpt;
  auto* eval = app.add_subcommand("eval", "Report MAE and MSE of a checkpoint on a dataset");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--data", data, "Dataset directory")->required();

  fs::path image, prefix;
  auto* infer_cmd = app.add_subcommand("infer", "Export density and localization maps for one image");
  infer_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  infer_cmd->add_option("--image", image, "PPM image")->required();
  infer_cmd->add_option("--out", prefix, "Output prefix")->required();

  bool full = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gradcheck->add_flag("--full", full, "Larger model and more sampled parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }
  if (train_cmd->parsed() && !config_path && !resume) {
    std::cerr << "train: one of --config or --resume is required\n";
    return usage;
  }

  try {
    if (synth->parsed()) return run_synth(seed, count, synth_out, synth_cfg);
    if (train_cmd->parsed()) return run_train(config_path, resume, data, train_out);
    if (eval->parsed()) return run_eval(ckpt, data);
    if (infer_cmd->parsed()) return run_infer(ckpt, image, prefix);
    if (gradcheck->parsed()) return run_gradcheck(full);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical_failure;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data_error;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return data_error;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return data_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return data_error;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return data_error;
  }
  return usage;
}
