#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hygnn/tensor.hpp"

namespace hygnn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

/// Moments are stored per parameter, in the order parameters are passed to adam_step.
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

AdamState make_adam_state(std::span<const Tensor> params, AdamOptions options);

/// One update with decoupled weight decay: p <- p * (1 - lr * wd), then the
/// bias-corrected Adam step. A parameter absent from grads (not reached by the
/// loss, e.g. graph weights when K = 0) takes a zero gradient.
void adam_step(std::span<Tensor> params, const GradientMap& grads, AdamState& state);

}  // namespace hygnn
