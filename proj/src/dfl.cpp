#include "hygnn/dfl.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace hygnn {

Domain domain_from_tag(int tag) {
  switch (tag) {
    case 1:
      return Domain::counting;
    case 2:
      return Domain::localization;
    default:
      throw std::invalid_argument("unknown domain tag " + std::to_string(tag));
  }
}

const char* domain_name(Domain d) { return d == Domain::counting ? "counting" : "localization"; }

std::vector<std::size_t> default_scales(std::size_t n) {
  switch (n) {
    case 1:
      return {1};
    case 2:
      return {1, 2};
    case 3:
      return {1, 2, 4};
    case 4:
      return {1, 2, 3, 4};
    case 5:
      return {1, 2, 3, 4, 6};
    default:
      break;
  }
  std::vector<std::size_t> s;
  for (std::size_t i = 1; i <= n; ++i) s.push_back(i);
  return s;
}

void DflConfig::validate() const {
  if (scales.size() < 2) throw std::invalid_argument("DFL needs at least two pyramid scales");
  std::set<std::size_t> distinct(scales.begin(), scales.end());
  if (distinct.size() != scales.size()) throw std::invalid_argument("pyramid bins must be distinct");
  if (*distinct.begin() < 1) throw std::invalid_argument("pyramid bins must be >= 1");
  if (!(width_multiplier > 0.0)) throw std::invalid_argument("width multiplier must be positive");
  if (node_channels == 0) throw std::invalid_argument("node channels must be positive");
  if (back_end_dilation == 0) throw std::invalid_argument("back-end dilation must be positive");
}

namespace {

std::size_t scaled(std::size_t channels, double multiplier) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(channels * multiplier)));
}

constexpr std::array<std::size_t, 10> kVggPlan{64, 64, 128, 128, 256, 256, 256, 512, 512, 512};
// Max pooling follows these front-end layer indices.
constexpr std::array<std::size_t, 3> kPoolAfter{1, 3, 6};
constexpr std::array<std::size_t, 7> kBackEndPlan{512, 512, 512, 256, 256, 128, 64};

}  // namespace

std::vector<std::size_t> front_end_channels(double width_multiplier) {
  std::vector<std::size_t> out;
  for (auto c : kVggPlan) out.push_back(scaled(c, width_multiplier));
  return out;
}

std::vector<std::size_t> back_end_channels(const DflConfig& config) {
  std::vector<std::size_t> out;
  for (auto c : kBackEndPlan) out.push_back(scaled(c, config.width_multiplier));
  out.push_back(config.node_channels);
  return out;
}

DflWeights init_dfl_weights(const DflConfig& config, Rng& rng) {
  config.validate();
  DflWeights w;
  std::size_t in = 3;
  for (auto c : front_end_channels(config.width_multiplier)) {
    w.front_end.push_back(make_conv(rng, c, in, 3));
    in = c;
  }
  const std::size_t shared = in;
  for (auto& series : w.back_end) {
    in = shared;
    for (auto c : back_end_channels(config)) {
      series.push_back(make_conv(rng, c, in, 3, config.back_end_dilation));
      in = c;
    }
  }
  return w;
}

Tensor front_end(const Tensor& image, std::span<const ConvParams> layers) {
  if (image.rank() != 4 || image.dim(1) != 3) {
    throw ShapeError("front_end expects [B,3,H,W], got " + to_string(image.shape()));
  }
  if (image.dim(2) % 8 || image.dim(3) % 8) {
    throw ShapeError("front_end: spatial size " + to_string(image.shape()) +
                     " not divisible by 8");
  }
  if (layers.size() != kVggPlan.size()) {
    throw std::invalid_argument("front_end expects 10 convolution layers");
  }
  Tensor x = image;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = relu(conv2d(x, layers[i]));
    if (std::find(kPoolAfter.begin(), kPoolAfter.end(), i) != kPoolAfter.end()) x = max_pool2x2(x);
  }
  return x;
}

Tensor back_end(const Tensor& shared, Domain domain, const DflWeights& weights) {
  const auto& series = weights.back_end[domain_index(domain)];
  Tensor x = shared;
  for (const auto& layer : series) x = relu(conv2d(x, layer));
  return x;
}

FeaturePyramid init_node_states(const Tensor& features, Domain domain,
                                std::span<const std::size_t> scales) {
  if (scales.empty()) throw std::invalid_argument("init_node_states: no scales");
  FeaturePyramid pyramid{domain, {}};
  for (auto bins : scales) pyramid.states.push_back(pyramid_pool(features, bins));
  return pyramid;
}

}  // namespace hygnn
