#include "hygnn/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hygnn {

AdamState make_adam_state(std::span<const Tensor> params, AdamOptions options) {
  if (!(options.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  AdamState state;
  state.options = options;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.numel(), 0.0);
    state.second_moment.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, const GradientMap& grads, AdamState& state) {
  const auto& opt = state.options;
  if (!(opt.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("adam: state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].numel()) {
      throw ShapeError("adam: moment size mismatch for parameter " + std::to_string(i));
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  const double decay = 1.0 - opt.lr * opt.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].mutable_data();
    auto g = grads[params[i]].data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      if (opt.weight_decay != 0.0) value[k] *= decay;
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g[k];
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      value[k] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  }
}

}  // namespace hygnn
