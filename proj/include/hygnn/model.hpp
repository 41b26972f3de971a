#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hygnn/dfl.hpp"
#include "hygnn/graph.hpp"

namespace hygnn {

struct ModelConfig {
  DflConfig dfl;
  HybridGraphConfig graph;

  /// Builds a consistent config: N default pyramid scales, K iterations.
  static ModelConfig make(std::size_t scales, std::size_t iterations,
                          double width_multiplier = 0.125, std::size_t node_channels = 8);
  /// Also checks that the graph's N and C agree with the DFL config.
  void validate() const;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

struct ModelOutput {
  Tensor density;       // [B,1,H/8,W/8]
  Tensor localization;  // [B,1,H/8,W/8]
};

class HyGnnModel {
 public:
  HyGnnModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const DflWeights& dfl_weights() const { return dfl_; }
  const GraphWeights& graph_weights() const { return graph_; }

  /// Every trainable tensor with a stable dotted name, in a fixed order.
  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::vector<Tensor> parameter_tensors() const;
  std::size_t parameter_count() const;

  /// front-end -> two back-ends -> pyramid node states -> K rounds of message
  /// passing -> per-domain readout.
  ModelOutput forward(const Tensor& image) const;

  /// The 2N initial node states for an image (before message passing).
  std::vector<NodeState> initial_states(const Tensor& image) const;

 private:
  void register_parameters();

  ModelConfig config_;
  DflWeights dfl_;
  GraphWeights graph_;
  std::vector<NamedParameter> params_;
};

inline ModelOutput model_forward(const Tensor& image, const HyGnnModel& model) {
  return model.forward(image);
}

/// Sum of each sample's density map: the predicted counts, one per batch element.
std::vector<double> predicted_counts(const Tensor& density);

}  // namespace hygnn
