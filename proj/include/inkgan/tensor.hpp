#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A tensor is a cheap handle onto a graph node. Values are immutable once an
// op has produced them; only leaf tensors (parameters, inputs) may be written
// through mutable_values(), which is how optimizers and checkpoint loading
// update weights. Gradients accumulate across backward() calls until
// zero_grad() clears them.
//
// All image tensors use NCHW order.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "inkgan/errors.hpp"

namespace inkgan {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

enum class Mode { train, eval };

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::shared_ptr<std::vector<T>> value;
  std::vector<T> grad;
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  std::span<T> grad_buffer() {
    if (grad.size() != value->size()) grad.assign(value->size(), T(0));
    return grad;
  }
};

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// True unless a NoGradGuard is alive on this thread.
inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables graph recording for its lifetime (inference, evaluation).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class BasicTensor {
 public:
  using value_type = T;
  using NodeType = detail::Node<T>;

  BasicTensor() = default;

  BasicTensor(Shape shape, std::vector<T> values) {
    if (inkgan::numel(shape) != values.size()) {
      throw ShapeError("tensor shape " + to_string(shape) + " needs " + std::to_string(inkgan::numel(shape)) +
                       " values, got " + std::to_string(values.size()));
    }
    for (auto e : shape) {
      if (e == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
    }
    node_ = std::make_shared<NodeType>();
    node_->shape = std::move(shape);
    node_->value = std::make_shared<std::vector<T>>(std::move(values));
  }

  static BasicTensor full(Shape shape, T v) {
    const auto n = inkgan::numel(shape);
    return BasicTensor(std::move(shape), std::vector<T>(n, v));
  }
  static BasicTensor zeros(Shape shape) { return full(std::move(shape), T(0)); }
  static BasicTensor scalar(T v) { return BasicTensor(Shape{1}, std::vector<T>{v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node().shape; }
  std::size_t rank() const { return node().shape.size(); }
  std::size_t dim(std::size_t axis) const { return node().shape.at(axis); }
  std::size_t numel() const { return node().value->size(); }

  std::span<const T> values() const { return *node().value; }
  T operator[](std::size_t i) const { return (*node().value)[i]; }
  T item() const {
    if (numel() != 1) throw UsageError("item() on tensor of shape " + to_string(shape()));
    return (*node().value)[0];
  }

  /// Writable view of a leaf's storage.
  std::span<T> mutable_values() {
    if (!node().leaf) throw UsageError("only leaf tensors may be written in place");
    return *node_->value;
  }

  bool requires_grad() const { return node().requires_grad; }
  BasicTensor& set_requires_grad(bool on) {
    if (!node().leaf) throw UsageError("requires_grad can only be set on leaf tensors");
    node_->requires_grad = on;
    return *this;
  }
  bool is_leaf() const { return node().leaf; }
  const char* op_name() const { return node().op; }

  bool has_grad() const { return !node().grad.empty(); }
  /// Gradient buffer; empty span until a backward pass reached this tensor.
  std::span<const T> grad() const { return node().grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() {
    node().grad.clear();
    node().grad.shrink_to_fit();
  }

  /// Same values, cut from the graph.
  BasicTensor detach() const {
    BasicTensor out;
    out.node_ = std::make_shared<NodeType>();
    out.node_->shape = node().shape;
    out.node_->value = node().value;
    return out;
  }

  /// Deep copy as a fresh leaf.
  BasicTensor clone() const { return BasicTensor(shape(), *node().value); }

  NodeType& node() const {
    if (!node_) throw UsageError("use of an undefined tensor");
    return *node_;
  }
  const std::shared_ptr<NodeType>& node_ptr() const { return node_; }

  /// Builds an op result. Records the backward closure only when grad mode is
  /// on and some input requires grad. Non-finite outputs are rejected.
  static BasicTensor make_result(const char* op, Shape shape, std::vector<T> values,
                                 std::vector<BasicTensor> inputs,
                                 std::function<void(NodeType&)> backward) {
    for (const T& v : values) {
      if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
    }
    BasicTensor out;
    out.node_ = std::make_shared<NodeType>();
    out.node_->shape = std::move(shape);
    out.node_->value = std::make_shared<std::vector<T>>(std::move(values));
    out.node_->op = op;
    out.node_->leaf = false;
    bool needs = false;
    if (grad_enabled()) {
      for (const auto& in : inputs) needs = needs || in.requires_grad();
    }
    if (needs) {
      out.node_->requires_grad = true;
      out.node_->inputs.reserve(inputs.size());
      for (auto& in : inputs) out.node_->inputs.push_back(in.node_);
      out.node_->backward = std::move(backward);
    }
    return out;
  }

  /// View with another shape of the same element count.
  BasicTensor reshape(Shape new_shape) const {
    if (inkgan::numel(new_shape) != numel()) {
      throw ShapeError("cannot reshape " + to_string(shape()) + " to " + to_string(new_shape));
    }
    BasicTensor out = make_result("reshape", new_shape, {}, {*this}, [](NodeType& self) {
      auto& in = *self.inputs[0];
      auto g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    out.node_->value = node().value;
    return out;
  }

 private:
  std::shared_ptr<NodeType> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
struct NamedTensor {
  std::string name;
  BasicTensor<T> tensor;
};

/// Reverse-mode sweep from a scalar loss. Each reachable node is visited once
/// in reverse topological order; gradients on leaves accumulate across calls.
template <typename T>
void backward(const BasicTensor<T>& loss) {
  if (loss.numel() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) throw UsageError("loss does not depend on any tensor requiring grad");

  using Node = detail::Node<T>;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&loss.node(), 0}};
  seen.insert(&loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->leaf) n->grad.assign(n->value->size(), T(0));
  }
  loss.node().grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->leaf && (*it)->backward) (*it)->backward(**it);
  }
}

}  // namespace inkgan
