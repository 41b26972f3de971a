#include "hygnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hygnn/detail/autograd.hpp"

namespace hygnn {

using detail::Access;
using detail::Node;

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data, bool grad_tracked) {
  check_shape(shape);
  if (hygnn::numel(shape) != data.size()) {
    throw ShapeError("shape " + to_string(shape) + " holds " +
                     std::to_string(hygnn::numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->leaf_tracked = grad_tracked;
  node_->requires_grad = grad_tracked;
}

Tensor Tensor::zeros(Shape shape, bool grad_tracked) { return full(std::move(shape), 0.0, grad_tracked); }

Tensor Tensor::full(Shape shape, double value, bool grad_tracked) {
  check_shape(shape);
  auto n = hygnn::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), grad_tracked);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

const Shape& Tensor::shape() const {
  if (!node_) throw AutogradError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis out of range for shape " + to_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return hygnn::numel(shape()); }

std::span<const double> Tensor::data() const {
  if (!node_) throw AutogradError("use of undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw AutogradError("use of undefined tensor");
  if (!node_->inputs.empty() || node_->backward) {
    throw AutogradError("only leaf tensors may be mutated in place");
  }
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw ShapeError("index rank mismatch for " + to_string(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= s[axis]) throw ShapeError("index out of range for " + to_string(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return node_->value[flat];
}

bool Tensor::grad_tracked() const { return node_ && node_->leaf_tracked; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor Tensor::detach() const {
  return Tensor(shape(), std::vector<double>(node_->value.begin(), node_->value.end()));
}

Tensor Tensor::reshape(Shape new_shape) const {
  check_shape(new_shape);
  if (hygnn::numel(new_shape) != numel()) {
    throw ShapeError("cannot reshape " + to_string(shape()) + " to " + to_string(new_shape));
  }
  return detail::make_result(
      "reshape", std::move(new_shape), node_->value, {*this},
      [](const Node&, std::span<const double> g, std::span<std::span<double>> gin) {
        for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
      });
}

namespace detail {

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(Access::node(t));
    node->backward = std::move(backward);
  }
  return Access::wrap(std::move(node));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// GradientMap

const Tensor& GradientMap::operator[](const Tensor& p) const {
  if (auto it = grads_.find(p.id()); it != grads_.end()) return it->second.grad;
  auto [it, fresh] = zeros_.try_emplace(p.id());
  if (fresh) it->second = Entry{p, Tensor::zeros(p.shape())};
  return it->second.grad;
}

bool GradientMap::contains(const Tensor& p) const { return grads_.count(p.id()) != 0; }

void GradientMap::set(const Tensor& p, Tensor grad) {
  if (grad.shape() != p.shape()) {
    throw ShapeError("gradient shape " + to_string(grad.shape()) + " does not match " +
                     to_string(p.shape()));
  }
  zeros_.erase(p.id());
  grads_[p.id()] = Entry{p, std::move(grad)};
}

GradientMap& GradientMap::operator+=(const GradientMap& other) {
  for (const auto& [key, entry] : other.grads_) {
    auto it = grads_.find(key);
    if (it == grads_.end()) {
      zeros_.erase(key);
      grads_[key] = Entry{entry.param, entry.grad.detach()};
      continue;
    }
    std::vector<double> sum(it->second.grad.data().begin(), it->second.grad.data().end());
    auto rhs = entry.grad.data();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += rhs[i];
    it->second.grad = Tensor(entry.grad.shape(), std::move(sum));
  }
  return *this;
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape(const Tensor& loss) : loss_(loss) {
  if (!loss.defined()) throw AutogradError("backward on undefined tensor");
  if (loss.shape() != Shape{1}) {
    throw AutogradError("backward requires a scalar loss of shape [1], got " +
                        to_string(loss.shape()));
  }
  const auto& root = Access::node(loss);
  if (!root->requires_grad) {
    throw AutogradError("loss was not recorded on a tape (no tracked leaf reaches it)");
  }

  // Iterative post-order DFS: every node lands after all of its operands.
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      auto child = node->inputs[next++];
      if (child->requires_grad && visited.insert(child.get()).second) {
        stack.emplace_back(std::move(child), 0);
      }
      continue;
    }
    order_.push_back(node);
    stack.pop_back();
  }
}

GradientMap Tape::backward() const {
  std::unordered_map<const Node*, std::vector<double>> grads;
  grads.reserve(order_.size());
  grads[order_.back().get()] = {1.0};

  std::vector<std::span<double>> gin;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const Node& node = **it;
    auto found = grads.find(&node);
    if (found == grads.end() || !node.backward) continue;
    gin.assign(node.inputs.size(), {});
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      const auto& in = node.inputs[i];
      if (!in->requires_grad) continue;
      auto& buf = grads[in.get()];
      if (buf.empty()) buf.assign(in->value.size(), 0.0);
      gin[i] = buf;
    }
    // grads may rehash on insert above; re-find the output gradient.
    const auto& gout = grads.at(&node);
    node.backward(node, gout, gin);
    // Interior gradients are no longer needed once propagated.
    if (!node.leaf_tracked) grads.erase(&node);
  }

  GradientMap out;
  for (const auto& node : order_) {
    if (!node->leaf_tracked) continue;
    auto found = grads.find(node.get());
    auto leaf = Access::wrap(node);
    if (found == grads.end()) {
      out.set(leaf, Tensor::zeros(node->shape));
    } else {
      out.set(leaf, Tensor(node->shape, std::move(found->second)));
    }
  }
  return out;
}

GradientMap backward(const Tensor& loss) { return Tape(loss).backward(); }

// ---------------------------------------------------------------------------

Tensor finite_diff_grad(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  auto eval = [&](const std::vector<double>& values) {
    Tensor y = f(Tensor(x.shape(), values));
    if (y.numel() != 1) {
      throw ShapeError("finite_diff_grad: function returned shape " + to_string(y.shape()));
    }
    return y.item();
  };
  std::vector<double> probe(x.data().begin(), x.data().end());
  std::vector<double> grad(probe.size());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + eps;
    const double up = eval(probe);
    probe[k] = orig - eps;
    const double down = eval(probe);
    probe[k] = orig;
    grad[k] = (up - down) / (2.0 * eps);
  }
  return Tensor(x.shape(), std::move(grad));
}

}  // namespace hygnn
