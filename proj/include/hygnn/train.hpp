#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hygnn/checkpoint.hpp"
#include "hygnn/config.hpp"
#include "hygnn/data.hpp"
#include "hygnn/model.hpp"
#include "hygnn/optim.hpp"

namespace hygnn {

/// Raised when the loss or a gradient stops being finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossRecord {
  std::uint64_t step = 0;  // 1-based index of the optimizer step that produced it
  double total = 0.0;
  double density = 0.0;
  double localization = 0.0;
};

/// Stacks equally sized [3,H,W] images into [B,3,H,W].
Tensor stack_images(std::span<const Tensor> images);

/// Seeded mini-batch loop. Batch composition and augmentation for step t
/// depend only on (seed, t), so a resumed trainer reproduces the
/// uninterrupted run exactly.
class Trainer {
 public:
  Trainer(TrainConfig config, std::vector<Scene> dataset);
  /// Restores model, optimizer and step counter. The dataset must be the same.
  Trainer(const Checkpoint& checkpoint, std::vector<Scene> dataset);

  /// One forward/backward/Adam update. Throws NumericalError on a non-finite loss.
  LossRecord step();
  std::vector<LossRecord> run(std::uint64_t steps);

  Checkpoint checkpoint() const;

  const TrainConfig& config() const { return config_; }
  const HyGnnModel& model() const { return model_; }
  std::uint64_t steps_done() const { return step_; }
  std::size_t dataset_size() const { return scenes_.size(); }

 private:
  std::vector<std::size_t> batch_indices(std::uint64_t step) const;

  TrainConfig config_;
  std::vector<Scene> scenes_;
  std::vector<DensityMap> density_;
  std::vector<LocalizationMap> localization_;
  HyGnnModel model_;
  std::vector<Tensor> params_;
  AdamState adam_;
  std::uint64_t step_ = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRecord> log;
};

/// Runs config.iterations steps. on_step sees every record; on_checkpoint is
/// called every config.checkpoint_every steps when that is non-zero.
TrainResult train(const TrainConfig& config, std::vector<Scene> dataset,
                  const std::function<void(const LossRecord&)>& on_step = {},
                  const std::function<void(const Checkpoint&)>& on_checkpoint = {});

/// Writes every model parameter into ckpt as "param/<name>".
void store_parameters(const HyGnnModel& model, Checkpoint& ckpt);
/// Copies "param/<name>" records into the model. Throws CheckpointError on a
/// missing record or a shape mismatch.
void restore_parameters(HyGnnModel& model, const Checkpoint& ckpt);

TrainConfig config_from_checkpoint(const Checkpoint& ckpt);
HyGnnModel model_from_checkpoint(const Checkpoint& ckpt);

struct EvalResult {
  double mae = 0.0;
  double mse = 0.0;  // root of the mean squared count error
  std::vector<double> predicted;
  std::vector<double> ground_truth;
};

/// MAE = mean |p - g|, MSE = sqrt(mean (p - g)^2). Throws on empty or
/// mismatched inputs.
EvalResult compute_metrics(std::span<const double> predicted, std::span<const double> ground_truth);

/// Full-image counts (density sums) against annotation counts.
EvalResult evaluate(const HyGnnModel& model, std::span<const Scene> dataset);

struct InferenceResult {
  Tensor density;       // [1,H/8,W/8]
  Tensor localization;  // [1,H/8,W/8]
  double count = 0.0;   // raw density sum
};

InferenceResult infer(const HyGnnModel& model, const Tensor& image);

/// Writes <prefix>.density.pgm, <prefix>.localization.pgm and <prefix>.count.txt.
InferenceResult infer_export(const HyGnnModel& model, const Tensor& image,
                             const std::filesystem::path& prefix);

}  // namespace hygnn
