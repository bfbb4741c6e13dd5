#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "hgv/tensor.hpp"

namespace hgv::tensor {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t numel() const { return value().numel(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Backward rule of a recorded op. `parent_grads[i]` is null when parent i
// does not require a gradient; otherwise it is a zero-initialized (or
// partially accumulated) buffer of the parent's shape.
using BackwardFn = std::function<void(const Tensor& out_value, const Tensor& out_grad,
                                      std::span<const Tensor* const> parent_values,
                                      std::span<Tensor* const> parent_grads)>;

// Reverse-mode tape. Nodes are appended in evaluation order, so parents always
// precede children and a reverse sweep is a valid topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);  // requires_grad input, gradient readable via grad()
  // One node per parameter per tape; repeated calls return the same node.
  Var param(Parameter& p);

  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Gradients add
  // into every node accumulator and into reached Parameter::grad buffers.
  void backward(Var loss);

  const Tensor& value(const Var& v) const { return nodes_.at(v.id()).val(); }
  const Tensor& grad(const Var& v) const;
  bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }

  std::size_t size() const { return nodes_.size(); }
  void clear();

  // Running hash over the branch taken at every piecewise op (relu sign,
  // active clamp side). Two evaluations with equal signatures lie on the same
  // smooth piece of the computation.
  std::uint64_t kink_signature() const { return kink_signature_; }
  void note_branch(std::uint64_t branch);

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;  // parameter nodes alias Parameter::value
    const Tensor& val() const { return ref ? *ref : value; }
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  std::uint64_t kink_signature_ = 0;
};

enum class ElementwiseKind { add, sub, mul, div, sigmoid, tanh, relu, log, negate, scale };

// Generic entry point. Binary kinds take `b`; `scale` multiplies by `constant`.
// Binary operands must have equal shapes or one of them must hold a single value.
Var elementwise(ElementwiseKind kind, Var a, std::optional<Var> b = std::nullopt, double constant = 1.0);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var log(Var a);
Var negate(Var a);
Var scale(Var a, double factor);
Var add_constant(Var a, double offset);
Var softplus(Var a);

// Clamps into [lo, hi]; the gradient is zero where the clamp is active.
Var clamp(Var a, double lo, double hi);
// Pushes |x| up to `floor` keeping the sign (x == 0 maps to +floor).
Var clamp_abs_min(Var a, double floor);

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);

// Valid (unpadded) 2-D convolution. input cin x H x W, kernels cout x cin x k x k.
Var conv2d(Var input, Var kernels, Var bias, std::size_t stride);

Var softmax(Var x, std::size_t axis);

enum class ReduceKind { sum, mean, max_abs };
// Reduces over `axis`, or over every element when axis is empty (result shape {1}).
// max_abs is not differentiable and yields a constant node.
Var reduce(ReduceKind kind, Var x, std::optional<std::size_t> axis = std::nullopt);
Var sum(Var x);
Var mean(Var x);

// Rows [begin, begin + count) of a rank-2 tensor.
Var slice_rows(Var x, std::size_t begin, std::size_t count);
// Concatenates rank-2 tensors with equal row counts along the column axis.
Var concat_cols(std::span<const Var> parts);
// Concatenates rank-2 tensors with equal column counts along the row axis.
Var concat_rows(std::span<const Var> parts);

// Plain tensor helpers used outside the tape.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& x, std::size_t axis);
double max_abs(const Tensor& x);

}  // namespace hgv::tensor
