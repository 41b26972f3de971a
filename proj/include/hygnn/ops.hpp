#pragma once

#include <cstddef>
#include <vector>

#include "hygnn/tensor.hpp"

namespace hygnn {

// Elementwise arithmetic. Operands must share a shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// 1 - x
Tensor one_minus(const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

/// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);
/// Mean of all elements, shape [1].
Tensor mean(const Tensor& x);

/// Multiplies every channel of x [B,C,H,W] by a single-channel map [B,1,H,W].
Tensor gate_channels(const Tensor& weight_map, const Tensor& x);

struct ConvParams {
  Tensor kernel;  // [out, in, kh, kw]
  Tensor bias;    // [out]
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;

  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(1); }
};

/// Cross-correlation with dilation, zero padding and per-channel bias.
Tensor conv2d(const Tensor& input, const ConvParams& params);

/// 2x2 max pooling with stride 2. Ties resolve to the first element in row-major order.
Tensor max_pool2x2(const Tensor& input);

/// Average-pools each channel onto a bins x bins grid with adaptive windows
/// [floor(i*H/bins), ceil((i+1)*H/bins)).
Tensor adaptive_avg_pool(const Tensor& input, std::size_t bins);

/// Bilinear interpolation with corner-aligned sampling
/// (source = out_index * (in - 1) / (out - 1)).
Tensor bilinear_resize(const Tensor& input, std::size_t out_h, std::size_t out_w);

/// Adaptive average pool to bins x bins, then bilinear resize back to H x W.
Tensor pyramid_pool(const Tensor& input, std::size_t bins);

/// Channel-axis concatenation of [B,Ci,H,W] tensors in argument order.
Tensor concat_channels(const std::vector<Tensor>& inputs);

/// Per-sample 1x1 convolution: input [B,C,H,W], kernel [B,C,C,1,1] (out, in).
Tensor dynamic_conv(const Tensor& input, const Tensor& kernel);

/// Spatial mean: [B,C,H,W] -> [B,C].
Tensor global_avg_pool(const Tensor& input);

/// Dense layer: x [B,in], weight [out,in], bias [out] -> [B,out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Mean of squared differences. The target must not require a gradient.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Sum of squared differences. The target must not require a gradient.
Tensor sse_loss(const Tensor& pred, const Tensor& target);

struct ConvGruParams {
  ConvParams reset;
  ConvParams update;
  ConvParams candidate;
};

/// Convolutional GRU:
///   z = sigmoid(conv_z([state, input])), r = sigmoid(conv_r([state, input]))
///   cand = tanh(conv_h([r * state, input]))
///   out = (1 - z) * state + z * cand
Tensor conv_gru_step(const Tensor& state, const Tensor& input, const ConvGruParams& params);

}  // namespace hygnn
