// SPDX-License-Identifier: Apache-2.0
//
// Dense f32 tensors with a dynamic reverse-mode gradient graph.
//
// A Tensor is a shared handle to a node holding its values, an optional
// gradient buffer, and (for results of differentiable ops) the inputs and
// backward rule that produced it. Copying a Tensor aliases the node.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace discond {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

/// Operand shapes do not conform for an op.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value surfaced during differentiation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialised on first use.
  std::span<float> grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor.
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<float> values, bool requires_grad = false);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, float value);
  static Tensor scalar(float value) { return full({1}, value); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const { return values().size(); }

  std::span<float> values();
  std::span<const float> values() const;
  std::vector<float> to_vector() const;
  float item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const;
  /// Gradient buffer; allocated (zeros) on first access.
  std::span<float> grad();
  std::span<const float> grad() const;
  void zero_grad();

  /// Fresh leaf holding a copy of the values, outside any graph.
  Tensor detach() const;
  std::string_view op() const;

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Whether newly created op results record a backward graph.
bool grad_enabled() noexcept;

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Populates gradients of every leaf reachable from `loss` (a one-element
/// tensor). Leaf gradients accumulate; intermediate gradients are released.
/// Throws NumericalError naming the producing op when a value or gradient
/// in the graph is not finite.
void backward(const Tensor& loss);

namespace detail {

/// Builds an op result. The result joins the graph when grad recording is on
/// and any input requires a gradient.
Tensor make_result(std::string_view op, Shape shape, std::vector<float> value,
                   std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn);

}  // namespace detail

}  // namespace discond
