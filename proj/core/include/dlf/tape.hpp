#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dlf/tensor.hpp"

namespace dlf {

// Handle to a node on a Tape. Only meaningful for the tape that produced it.
struct ValueId {
  int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

// Wengert-list reverse-mode tape over a fixed primitive set. Nodes are
// appended in topological order during the forward pass; backward() walks the
// list in reverse. Every primitive validates operand shapes up front and
// checks its output for NaN/Inf (a hard NumericError).
//
// One backward() per use is the intended pattern; calling it again resets all
// gradients first.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input (parameters). Gradient is tracked.
  ValueId leaf(Tensor value);
  // Non-differentiable input (data, masks, positional tables).
  ValueId constant(Tensor value);

  const Tensor& value(ValueId id) const { return node(id).value; }
  // Gradient after backward(); zero tensor of the right shape if untouched.
  Tensor gradient(ValueId id) const;
  bool gradient_touched(ValueId id) const { return !node(id).grad.empty(); }

  // --- primitives -----------------------------------------------------
  ValueId add(ValueId a, ValueId b);            // elementwise, same shape
  ValueId sub(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);            // elementwise (Hadamard)
  ValueId scale(ValueId a, double c);           // a * c
  ValueId add_scalar(ValueId a, double c);      // a + c elementwise
  ValueId matmul(ValueId a, ValueId b);         // (n,k)x(k,m) -> (n,m)
  ValueId transpose(ValueId a);
  ValueId relu(ValueId a);
  ValueId abs(ValueId a);
  ValueId softmax_rows(ValueId a);              // stable row softmax
  ValueId layer_norm(ValueId x, ValueId gain, ValueId bias, double eps = 1e-5);
  // 1-D temporal convolution with zero same-padding. x: (n, d_in),
  // w: (kernel*d_in, d_out) with tap t occupying rows [t*d_in, (t+1)*d_in),
  // b: (1, d_out). kernel must be odd.
  ValueId conv1d_same(ValueId x, ValueId w, ValueId b, int kernel);
  ValueId concat_rows(std::span<const ValueId> parts);
  ValueId concat_cols(std::span<const ValueId> parts);
  ValueId slice_cols(ValueId a, int begin, int end);
  ValueId slice_rows(ValueId a, int begin, int end);
  ValueId mean_rows(ValueId a);                 // (n,d) -> (1,d)
  ValueId mean_all(ValueId a);                  // -> scalar
  ValueId sum_all(ValueId a);                   // -> scalar
  // Cosine similarity of two same-size tensors viewed as flat vectors.
  // Zero-norm operands yield 0 with zero gradient.
  ValueId cosine_similarity(ValueId a, ValueId b);
  // Elementwise multiply by a fixed mask (dropout). Mask is not a node.
  ValueId dropout_mask(ValueId a, Tensor mask);

  // Composed error reductions over same-shape tensors.
  ValueId mse(ValueId a, ValueId b) { return mean_all(square_diff(a, b)); }
  ValueId mae(ValueId a, ValueId b) { return mean_all(abs(sub(a, b))); }

  // --- reverse pass ----------------------------------------------------
  // loss must be a single-element node.
  void backward(ValueId loss);

  size_t node_count() const { return nodes_.size(); }
  // Outputs of every softmax_rows node, in creation order (attention-map
  // introspection for invariant checks).
  const std::vector<ValueId>& softmax_nodes() const { return softmax_nodes_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched during backward
    bool requires_grad = false;
    const char* op = "leaf";
    std::function<void(Tape&)> backprop;  // null for leaves/constants
  };

  ValueId square_diff(ValueId a, ValueId b) {
    ValueId d = sub(a, b);
    return mul(d, d);
  }

  Node& node(ValueId id);
  const Node& node(ValueId id) const;
  ValueId push(Tensor value, bool requires_grad, const char* op,
               std::function<void(Tape&)> backprop);
  // Gradient buffer for accumulation, allocated to zeros on first touch.
  Tensor& grad_buf(int32_t idx);
  void reset_grads();

  void check_same_shape(const char* op, ValueId a, ValueId b) const;

  std::vector<Node> nodes_;
  std::vector<ValueId> softmax_nodes_;
  bool backward_ran_ = false;
};

}  // namespace dlf
