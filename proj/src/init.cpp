#include "hygnn/init.hpp"

#include <cmath>

namespace hygnn {

Tensor random_normal(Rng& rng, Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

ConvParams make_conv(Rng& rng, std::size_t out_channels, std::size_t in_channels,
                     std::size_t kernel_size, std::size_t dilation) {
  if (kernel_size % 2 == 0) throw ShapeError("convolution kernels must have odd size");
  const double fan_in = static_cast<double>(in_channels * kernel_size * kernel_size);
  ConvParams p;
  p.kernel = random_normal(rng, {out_channels, in_channels, kernel_size, kernel_size},
                           std::sqrt(2.0 / fan_in));
  p.bias = Tensor::zeros({out_channels}, true);
  p.stride = 1;
  p.dilation = dilation;
  p.padding = dilation * (kernel_size - 1) / 2;
  return p;
}

ConvGruParams make_conv_gru(Rng& rng, std::size_t channels, std::size_t kernel_size) {
  ConvGruParams p;
  p.reset = make_conv(rng, channels, 2 * channels, kernel_size);
  p.update = make_conv(rng, channels, 2 * channels, kernel_size);
  p.candidate = make_conv(rng, channels, 2 * channels, kernel_size);
  return p;
}

}  // namespace hygnn
