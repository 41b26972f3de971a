#include "hygnn/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "hygnn/ops.hpp"

namespace hygnn {

namespace {

enum class Stream : std::uint32_t { permutation = 1, augment = 2 };

std::mt19937_64 derived_rng(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("stack: no tensors");
  const Shape& inner = items.front().shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<double> data;
  data.reserve(numel(shape));
  for (const auto& t : items) {
    if (t.shape() != inner) {
      throw ShapeError("stack: mismatched shapes " + to_string(inner) + " and " + to_string(t.shape()));
    }
    auto d = t.data();
    data.insert(data.end(), d.begin(), d.end());
  }
  return Tensor(std::move(shape), std::move(data));
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> copy_of(std::span<const double> v) { return {v.begin(), v.end()}; }

void copy_into(const CheckpointRecord& rec, std::span<double> dst, const Shape& shape) {
  if (rec.shape != shape) {
    throw CheckpointError("record '" + rec.name + "' has shape " + to_string(rec.shape) +
                          ", expected " + to_string(shape));
  }
  std::copy(rec.values.begin(), rec.values.end(), dst.begin());
}

AdamOptions adam_options(const TrainConfig& c) {
  return {c.lr, c.beta1, c.beta2, c.epsilon, c.weight_decay};
}

void check_dataset(const TrainConfig& config, const std::vector<Scene>& scenes) {
  if (scenes.empty()) throw std::invalid_argument("training dataset is empty");
  for (const auto& s : scenes) {
    if (s.height() < config.crop || s.width() < config.crop) {
      throw std::invalid_argument("crop " + std::to_string(config.crop) + " exceeds a " +
                                  std::to_string(s.height()) + "x" + std::to_string(s.width()) + " scene");
    }
  }
}

}  // namespace

Tensor stack_images(std::span<const Tensor> images) { return stack(images); }

Trainer::Trainer(TrainConfig config, std::vector<Scene> dataset)
    : config_((config.validate(), std::move(config))),
      scenes_(std::move(dataset)),
      model_(config_.model_config(), config_.seed) {
  check_dataset(config_, scenes_);
  for (const auto& s : scenes_) {
    density_.push_back(generate_density_gt(s, config_.sigma));
    localization_.push_back(generate_localization_gt(s, config_.sigma_loc));
  }
  params_ = model_.parameter_tensors();
  adam_ = make_adam_state(params_, adam_options(config_));
}

Trainer::Trainer(const Checkpoint& ckpt, std::vector<Scene> dataset)
    : Trainer(config_from_checkpoint(ckpt), std::move(dataset)) {
  restore_parameters(model_, ckpt);
  const auto& named = model_.parameters();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& shape = named[i].tensor.shape();
    copy_into(ckpt.at("adam/m/" + named[i].name), adam_.first_moment[i], shape);
    copy_into(ckpt.at("adam/v/" + named[i].name), adam_.second_moment[i], shape);
  }
  adam_.step = static_cast<std::uint64_t>(ckpt.at("adam/step").values.at(0));
  step_ = static_cast<std::uint64_t>(ckpt.at("train/step").values.at(0));
}

std::vector<std::size_t> Trainer::batch_indices(std::uint64_t step) const {
  // Sample s of the stream is the (s mod n)-th entry of the permutation of epoch s / n.
  const std::size_t n = scenes_.size();
  std::vector<std::size_t> out;
  std::vector<std::size_t> perm;
  std::uint64_t cached_epoch = ~std::uint64_t{0};
  for (std::size_t b = 0; b < config_.batch; ++b) {
    const std::uint64_t s = step * config_.batch + b;
    const std::uint64_t epoch = s / n;
    if (epoch != cached_epoch) {
      perm.resize(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      auto rng = derived_rng(config_.seed, Stream::permutation, epoch);
      std::shuffle(perm.begin(), perm.end(), rng);
      cached_epoch = epoch;
    }
    out.push_back(perm[s % n]);
  }
  return out;
}

LossRecord Trainer::step() {
  const auto indices = batch_indices(step_);
  std::vector<Tensor> images, dens, locs;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto i = indices[b];
    const auto& scene = scenes_[i];
    auto rng = derived_rng(config_.seed, Stream::augment, step_, b);
    const std::size_t c = config_.crop;
    std::uniform_int_distribution<std::size_t> top_cells(0, (scene.height() - c) / kOutputStride);
    std::uniform_int_distribution<std::size_t> left_cells(0, (scene.width() - c) / kOutputStride);
    const std::size_t top = top_cells(rng) * kOutputStride;
    const std::size_t left = left_cells(rng) * kOutputStride;
    const bool flip = config_.flip && std::bernoulli_distribution(0.5)(rng);
    auto sample = crop_sample(scene, density_[i], localization_[i], top, left, c, flip);
    images.push_back(sample.scene.image);
    dens.push_back(sample.density.grid);
    locs.push_back(sample.localization.grid);
  }

  const auto out = model_.forward(stack(images));
  const auto d_target = stack(dens);
  const auto l_target = stack(locs);
  const bool sum = config_.reduction == LossReduction::sum;
  const auto d_loss = sum ? sse_loss(out.density, d_target) : mse_loss(out.density, d_target);
  const auto l_loss = sum ? sse_loss(out.localization, l_target) : mse_loss(out.localization, l_target);
  const auto total = add(d_loss, scale(l_loss, config_.lambda));

  LossRecord rec{step_ + 1, total.item(), d_loss.item(), l_loss.item()};
  if (!std::isfinite(rec.total)) {
    throw NumericalError("loss is not finite at step " + std::to_string(rec.step) +
                         " (density " + std::to_string(rec.density) + ", localization " +
                         std::to_string(rec.localization) + ")");
  }
  const auto grads = backward(total);
  for (const auto& p : model_.parameters()) {
    if (!all_finite(grads[p.tensor].data())) {
      throw NumericalError("gradient of " + p.name + " is not finite at step " + std::to_string(rec.step));
    }
  }
  adam_step(params_, grads, adam_);
  ++step_;
  return rec;
}

std::vector<LossRecord> Trainer::run(std::uint64_t steps) {
  std::vector<LossRecord> log;
  log.reserve(steps);
  for (std::uint64_t i = 0; i < steps; ++i) log.push_back(step());
  return log;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  for (const auto& [key, value] : config_snapshot(config_)) ckpt.add_scalar("config/" + key, value);
  ckpt.add_scalar("train/step", static_cast<double>(step_));
  ckpt.add_scalar("adam/step", static_cast<double>(adam_.step));
  store_parameters(model_, ckpt);
  const auto& named = model_.parameters();
  for (std::size_t i = 0; i < named.size(); ++i) {
    ckpt.add("adam/m/" + named[i].name, named[i].tensor.shape(), adam_.first_moment[i]);
    ckpt.add("adam/v/" + named[i].name, named[i].tensor.shape(), adam_.second_moment[i]);
  }
  return ckpt;
}

TrainResult train(const TrainConfig& config, std::vector<Scene> dataset,
                  const std::function<void(const LossRecord&)>& on_step,
                  const std::function<void(const Checkpoint&)>& on_checkpoint) {
  Trainer trainer(config, std::move(dataset));
  TrainResult result;
  for (std::uint64_t i = 0; i < config.iterations; ++i) {
    result.log.push_back(trainer.step());
    if (on_step) on_step(result.log.back());
    if (on_checkpoint && config.checkpoint_every && trainer.steps_done() % config.checkpoint_every == 0) {
      on_checkpoint(trainer.checkpoint());
    }
  }
  result.checkpoint = trainer.checkpoint();
  return result;
}

void store_parameters(const HyGnnModel& model, Checkpoint& ckpt) {
  for (const auto& p : model.parameters()) {
    ckpt.add("param/" + p.name, p.tensor.shape(), copy_of(p.tensor.data()));
  }
}

void restore_parameters(HyGnnModel& model, const Checkpoint& ckpt) {
  for (const auto& p : model.parameters()) {
    Tensor t = p.tensor;
    copy_into(ckpt.at("param/" + p.name), t.mutable_data(), t.shape());
  }
}

TrainConfig config_from_checkpoint(const Checkpoint& ckpt) {
  std::map<std::string, double> snapshot;
  constexpr std::string_view prefix = "config/";
  for (const auto& r : ckpt.records) {
    if (r.name.starts_with(prefix) && r.values.size() == 1) {
      snapshot[r.name.substr(prefix.size())] = r.values[0];
    }
  }
  try {
    return config_from_snapshot(snapshot);
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  }
}

HyGnnModel model_from_checkpoint(const Checkpoint& ckpt) {
  const auto config = config_from_checkpoint(ckpt);
  HyGnnModel model(config.model_config(), config.seed);
  restore_parameters(model, ckpt);
  return model;
}

EvalResult compute_metrics(std::span<const double> predicted, std::span<const double> ground_truth) {
  if (predicted.empty()) throw std::invalid_argument("metrics need at least one image");
  if (predicted.size() != ground_truth.size()) {
    throw std::invalid_argument("predicted and ground-truth counts differ in length");
  }
  EvalResult r;
  r.predicted.assign(predicted.begin(), predicted.end());
  r.ground_truth.assign(ground_truth.begin(), ground_truth.end());
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - ground_truth[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(predicted.size());
  r.mae = abs_sum / n;
  r.mse = std::sqrt(sq_sum / n);
  return r;
}

EvalResult evaluate(const HyGnnModel& model, std::span<const Scene> dataset) {
  std::vector<double> predicted;
  std::vector<double> truth;
  for (const auto& scene : dataset) {
    predicted.push_back(infer(model, scene.image).count);
    truth.push_back(static_cast<double>(scene.count()));
  }
  return compute_metrics(predicted, truth);
}

InferenceResult infer(const HyGnnModel& model, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("infer expects a [3,H,W] image, got " + to_string(image.shape()));
  }
  const auto out = model.forward(image.detach().reshape({1, 3, image.dim(1), image.dim(2)}));
  const Shape grid{1, out.density.dim(2), out.density.dim(3)};
  InferenceResult r;
  r.density = out.density.detach().reshape(grid);
  r.localization = out.localization.detach().reshape(grid);
  r.count = predicted_counts(out.density).at(0);
  return r;
}

InferenceResult infer_export(const HyGnnModel& model, const Tensor& image,
                             const std::filesystem::path& prefix) {
  auto r = infer(model, image);
  const std::string base = prefix.string();
  write_pgm(base + ".density.pgm", r.density);
  write_pgm(base + ".localization.pgm", r.localization);
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, r.count);
  std::ofstream out(base + ".count.txt");
  if (!out) throw DataError(DataError::Kind::io, "cannot write " + base + ".count.txt");
  out.write(buf, res.ptr - buf);
  out << '\n';
  if (!out) throw DataError(DataError::Kind::io, "write failed for " + base + ".count.txt");
  return r;
}

}  // namespace hygnn
