#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace immf::tensor {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the define-by-run graph. Non-leaf nodes keep their inputs
// alive and know how to push their gradient back into them.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

}  // namespace detail

/// Dense row-major array with optional reverse-mode gradient tracking.
///
/// Copies share the underlying node, so a Tensor behaves like a handle to an
/// immutable value. Only leaves may be mutated in place (by optimizers).
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<T> data);
  static Tensor parameter(Shape shape, std::vector<T> data);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(T value) { return constant({1}, {value}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  std::string_view op() const { return node_->op; }

  std::span<const T> data() const { return node_->value; }
  /// Empty until a backward pass has reached this tensor.
  std::span<const T> grad() const { return node_->grad; }
  T item() const;
  T at(std::size_t flat) const { return node_->value.at(flat); }

  std::span<T> mutable_data();
  std::span<T> mutable_grad();
  void zero_grad();

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Reverse-mode pass from a scalar loss. Leaf gradients accumulate across
/// calls; intermediate gradients are recomputed from zero on every call.
template <typename T>
void backward(const Tensor<T>& loss);

}  // namespace immf::tensor
