#pragma once

// Reverse-mode automatic differentiation over dense row-major float64
// tensors. Graphs are built eagerly (define-by-run) and discarded with the
// last Value handle that references them.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cmig::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  const char* op = "leaf";

  bool is_leaf() const { return !backward_fn; }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

/// Handle to a node of the computation graph. Copies share the node.
///
/// All operators in this header work on rank-2 tensors (rows x cols); a
/// scalar is 1x1. Higher ranks exist only as storage (checkpoints).
class Value {
 public:
  Value() = default;
  explicit Value(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Value constant(Shape shape, std::vector<double> data);
  static Value parameter(Shape shape, std::vector<double> data);
  static Value zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Value full(std::size_t rows, std::size_t cols, double v);
  static Value scalar(double v);
  static Value matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }

  double operator()(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

  /// Same data, no history. Used for values that feed non-differentiable
  /// stages (kNN graphs, top-k selection, SVD).
  Value detach() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Accumulates d(root)/d(leaf) into every requires_grad leaf. Interior
/// gradients are reset at the start of each call; leaf gradients are not,
/// so calling twice without zero_grad() doubles them.
void backward(const Value& root);

// ---- primitives ----------------------------------------------------------

Value matmul(const Value& a, const Value& b);
Value transpose(const Value& a);
Value reshape(const Value& a, std::size_t rows, std::size_t cols);

// Elementwise with 2-D broadcasting: each dim must match or be 1.
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value div(const Value& a, const Value& b);

Value scale(const Value& a, double s);
Value add_scalar(const Value& a, double s);
Value neg(const Value& a);
Value square(const Value& a);

Value exp(const Value& a);
Value log(const Value& a);
Value sigmoid(const Value& a);
Value leaky_relu(const Value& a, double slope = 0.2);
Value relu(const Value& a);
Value clamp(const Value& a, double lo, double hi);

/// Repeats a 1xC, Rx1 or 1x1 value up to rows x cols.
Value broadcast_to(const Value& a, std::size_t rows, std::size_t cols);
Value concat(std::span<const Value> parts, int axis);
Value concat(std::initializer_list<Value> parts, int axis);
/// out[i] = a[indices[i]]; backward scatter-adds.
Value gather_rows(const Value& a, std::span<const std::size_t> indices);
/// out[i] = a.flat[indices[i]] as an n x 1 column.
Value gather_elements(const Value& a, std::span<const std::size_t> flat_indices);

// Reductions. axis 0 collapses rows (-> 1 x C), axis 1 collapses columns
// (-> R x 1).
Value sum(const Value& a, int axis);
Value mean(const Value& a, int axis);
Value sum_all(const Value& a);
Value mean_all(const Value& a);
/// Max with gradient routed to the argmax only; ties go to the lowest index.
Value max_reduce(const Value& a, int axis);
/// Indices chosen by max_reduce along the same axis (no graph).
std::vector<std::size_t> argmax(const Value& a, int axis);
Value softmax(const Value& a, int axis = 1);
/// Euclidean norm along an axis. The gradient at a zero vector is zero.
Value l2norm(const Value& a, int axis = 1);

}  // namespace cmig::ad
