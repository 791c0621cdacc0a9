#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dnas3d/array.hpp"

namespace dnas3d {

namespace detail {

struct Node {
  Array value;
  Array grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Array& grad_buffer() {
    if (grad.empty()) grad = Array(value.shape());
    return grad;
  }
};

}  // namespace detail

/// Handle to a node of the dynamic differentiation graph. Copies share the
/// same node; use clone() for an independent leaf.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Array value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Array& value() const { return node_->value; }
  Array& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Array& grad() const { return node_->grad; }
  void clear_grad() { node_->grad = Array(); }

  Tensor clone() const;

  /// Reverse-mode sweep from a scalar. Leaf gradients accumulate; interior
  /// gradients are released once consumed.
  void backward() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
  friend Tensor make_op(Array, const std::vector<Tensor>&, std::function<void(detail::Node&)>);
};

/// Creates an interior node. The graph edge and backward rule are kept only
/// when grad mode is on and some input requires a gradient.
Tensor make_op(Array value, const std::vector<Tensor>& inputs,
               std::function<void(detail::Node&)> backward);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct Parameter {
  std::string name;
  Tensor tensor;
};

}  // namespace dnas3d
