#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hygnn {

using Shape = std::vector<std::size_t>;

/// Thrown when tensor shapes or sizes violate an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown on misuse of the differentiation machinery.
class AutogradError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct Node;
class Access;
}  // namespace detail

/// Dense row-major array of doubles with optional gradient tracking.
///
/// A Tensor is a cheap handle; copies share storage. Tensors created with
/// grad_tracked = true are leaves (parameters or checked inputs) and are the
/// only ones whose values may be mutated in place. Every other tensor is the
/// immutable result of an operation and, when any operand requires a
/// gradient, remembers its operands and a local backward rule.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool grad_tracked = false);

  static Tensor zeros(Shape shape, bool grad_tracked = false);
  static Tensor full(Shape shape, double value, bool grad_tracked = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Mutable view; only leaves may be written.
  std::span<double> mutable_data();

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  /// True for leaves created with grad_tracked = true.
  bool grad_tracked() const;
  /// True when a gradient can flow into this tensor from a tracked leaf.
  bool requires_grad() const;

  /// Untracked deep copy.
  Tensor detach() const;
  /// Same values, new shape; differentiable.
  Tensor reshape(Shape shape) const;

  const detail::Node* id() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;

  friend class detail::Access;
};

/// Gradients keyed by leaf tensor identity.
class GradientMap {
 public:
  /// Gradient for p; a zero tensor of p's shape when p was not reached.
  /// The reference stays valid for the lifetime of the map.
  const Tensor& operator[](const Tensor& p) const;
  bool contains(const Tensor& p) const;
  std::size_t size() const { return grads_.size(); }

  void set(const Tensor& p, Tensor grad);
  GradientMap& operator+=(const GradientMap& other);

 private:
  struct Entry {
    Tensor param;
    Tensor grad;
  };
  std::map<const detail::Node*, Entry> grads_;
  mutable std::map<const detail::Node*, Entry> zeros_;
};

/// Topologically ordered record of the operations that produced a scalar.
class Tape {
 public:
  /// Throws AutogradError if loss is not shape [1] or depends on no tracked leaf.
  explicit Tape(const Tensor& loss);

  std::size_t size() const { return order_.size(); }
  /// Reverse sweep. Pure: replaying yields bitwise-identical gradients.
  GradientMap backward() const;

 private:
  Tensor loss_;
  std::vector<std::shared_ptr<detail::Node>> order_;
};

GradientMap backward(const Tensor& loss);

/// Central-difference gradient of a scalar-valued function at x.
Tensor finite_diff_grad(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                        double eps);

}  // namespace hygnn
