#pragma once

#include <cstddef>
#include <random>

#include "hygnn/ops.hpp"

namespace hygnn {

using Rng = std::mt19937_64;

/// Fan-in scaled normal kernel (std = sqrt(2 / fan_in)), zero bias, "same"
/// padding for stride 1.
ConvParams make_conv(Rng& rng, std::size_t out_channels, std::size_t in_channels,
                     std::size_t kernel_size, std::size_t dilation = 1);

/// Normal(0, stddev) tensor, grad-tracked.
Tensor random_normal(Rng& rng, Shape shape, double stddev);

ConvGruParams make_conv_gru(Rng& rng, std::size_t channels, std::size_t kernel_size = 3);

}  // namespace hygnn
