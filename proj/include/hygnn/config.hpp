#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "hygnn/model.hpp"

namespace hygnn {

enum class LossReduction { mean, sum };

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
  std::size_t batch = 8;
  std::size_t crop = 64;
  double lambda = 0.001;
  std::uint64_t iterations = 1000;  // optimizer steps
  std::uint64_t seed = 0;
  std::size_t scales = 3;      // N
  std::size_t mp_iterations = 3;  // K
  double width_multiplier = 0.125;
  std::size_t node_channels = 8;
  std::size_t back_end_dilation = 2;
  double sigma = 4.0;
  double sigma_loc = 1.0;
  LossReduction reduction = LossReduction::mean;
  bool cross_domain = true;
  bool adapter = true;
  bool flip = true;
  std::uint64_t checkpoint_every = 0;  // 0 disables periodic checkpoints

  /// Throws std::invalid_argument on non-positive sizes, rates or a negative lambda.
  void validate() const;
  ModelConfig model_config() const;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Applies one `key = value` setting. Unknown keys and bad values throw ConfigError.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);

/// Parses `key = value` lines; `#` starts a comment; blank lines are ignored.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

/// Every setting as (key, value) with values encoded as doubles, for snapshots.
std::map<std::string, double> config_snapshot(const TrainConfig& config);
TrainConfig config_from_snapshot(const std::map<std::string, double>& snapshot);

}  // namespace hygnn
