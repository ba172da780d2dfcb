// SPDX-License-Identifier: Apache-2.0
#include "discond/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace discond {

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

std::span<float> Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad.assign(value.size(), 0.0f);
  return grad;
}

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<float> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw std::logic_error("tensor: use of an undefined tensor");
  return *node;
}

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

Tensor::Tensor(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  node_ = new_node(std::move(shape), std::vector<float>(n, 0.0f), requires_grad);
}

Tensor::Tensor(Shape shape, std::vector<float> values, bool requires_grad)
    : node_(new_node(std::move(shape), std::move(values), requires_grad)) {}

Tensor Tensor::full(Shape shape, float value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<float>(n, value));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::size(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

std::span<float> Tensor::values() {
  checked(node_);
  return node_->value;
}

std::span<const float> Tensor::values() const { return checked(node_).value; }

std::vector<float> Tensor::to_vector() const { return checked(node_).value; }

float Tensor::item() const {
  const auto& n = checked(node_);
  if (n.value.size() != 1) {
    throw ShapeError("item: expected a one-element tensor, got shape " + shape_str(n.shape));
  }
  return n.value[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  checked(node_);
  node_->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<float> Tensor::grad() {
  checked(node_);
  return node_->grad_buffer();
}

std::span<const float> Tensor::grad() const {
  checked(node_);
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  checked(node_);
  node_->grad.assign(node_->value.size(), 0.0f);
}

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return Tensor(n.shape, n.value);
}

std::string_view Tensor::op() const { return checked(node_).op; }

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

Tensor make_result(std::string_view op, Shape shape, std::vector<float> value,
                   std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn) {
  auto node = new_node(std::move(shape), std::move(value), false);
  node->op = op;
  if (g_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.defined() && t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->backward = std::move(backward_fn);
      node->inputs.reserve(inputs.size());
      for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    }
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace detail

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::logic_error("backward: undefined loss");
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  detail::Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Forward order, so the first op that produced a non-finite value is named.
  for (detail::Node* node : order) {
    if (node->backward && !all_finite(node->value)) {
      throw NumericalError("backward: non-finite value produced by op '" + std::string(node->op) + "'");
    }
  }

  root->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->backward) continue;
    if (node->grad.empty()) continue;
    if (!all_finite(node->grad)) {
      throw NumericalError("backward: non-finite gradient flowing into op '" + std::string(node->op) + "'");
    }
    for (const auto& input : node->inputs) {
      if (input && input->requires_grad) input->grad_buffer();
    }
    node->backward(*node);
    if (node != root) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

}  // namespace discond
