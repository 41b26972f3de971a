#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "hygnn/init.hpp"
#include "hygnn/ops.hpp"

namespace hygnn {

enum class Domain { counting = 1, localization = 2 };

/// Maps the numeric tag 1 (counting) / 2 (localization); throws otherwise.
Domain domain_from_tag(int tag);
inline std::size_t domain_index(Domain d) { return d == Domain::counting ? 0 : 1; }
inline Domain other_domain(Domain d) {
  return d == Domain::counting ? Domain::localization : Domain::counting;
}
const char* domain_name(Domain d);

/// Default pyramid bins for n scales: [1,2] / [1,2,4] / [1,2,3,4] / [1,2,3,4,6] ...
std::vector<std::size_t> default_scales(std::size_t n);

struct DflConfig {
  double width_multiplier = 0.125;
  std::vector<std::size_t> scales{1, 2, 4};
  std::size_t node_channels = 8;
  std::size_t back_end_dilation = 2;

  std::size_t scale_count() const { return scales.size(); }
  /// Requires >= 2 distinct bin counts, all >= 1, positive widths.
  void validate() const;
};

/// Front-end channel plan (VGG-16 first ten convolutions) after width scaling.
std::vector<std::size_t> front_end_channels(double width_multiplier);
/// Back-end channel plan: eight dilated convolutions, the last emitting node_channels.
std::vector<std::size_t> back_end_channels(const DflConfig& config);

struct DflWeights {
  std::vector<ConvParams> front_end;               // 10 layers
  std::array<std::vector<ConvParams>, 2> back_end;  // counting, localization; 8 layers each
};

DflWeights init_dfl_weights(const DflConfig& config, Rng& rng);

/// Shared front-end: 3x3 convs with ReLU and 2x2 max pooling after layers 2, 4 and 7.
/// Input [B,3,H,W] with H, W divisible by 8; output at 1/8 resolution.
Tensor front_end(const Tensor& image, std::span<const ConvParams> layers);

/// Domain-specific dilated back-end; spatial size is preserved.
Tensor back_end(const Tensor& shared, Domain domain, const DflWeights& weights);

/// Node states of one domain, all of identical shape.
struct FeaturePyramid {
  Domain domain = Domain::counting;
  std::vector<Tensor> states;
};

/// One initial node state per bin count: pyramid_pool(features, bins), which
/// pools onto bins x bins and resizes back to the feature map's size.
FeaturePyramid init_node_states(const Tensor& features, Domain domain,
                                std::span<const std::size_t> scales);
inline FeaturePyramid init_node_states(const Tensor& features, Domain domain,
                                       const DflConfig& config) {
  return init_node_states(features, domain, config.scales);
}

}  // namespace hygnn
