#pragma once

// Internal machinery for authoring differentiable operations.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hygnn/tensor.hpp"

namespace hygnn::detail {

/// Local backward rule. grad_in[i] is empty when operand i needs no gradient;
/// otherwise the rule must accumulate (+=) its contribution into it.
using BackwardFn =
    std::function<void(const Node& self, std::span<const double> grad_out,
                       std::span<std::span<double>> grad_in)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  bool leaf_tracked = false;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

class Access {
 public:
  static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
};

/// Builds an operation result. Operands and the backward rule are recorded
/// only when at least one operand requires a gradient.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward);

/// Convenience accessor for an operand's values inside a backward rule.
inline std::span<const double> input_value(const Node& self, std::size_t i) {
  return self.inputs[i]->value;
}

}  // namespace hygnn::detail
