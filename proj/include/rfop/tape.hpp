#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "rfop/tensor.hpp"

namespace rfop {

enum class OpKind {
  leaf,
  matmul,
  transpose,
  add,
  sub,
  mul,
  scale,
  add_scalar,
  tanh,
  sigmoid,
  relu,
  abs,
  l2_normalize,
  concat_channels,
  conv1d_mix,
  add_bias,
  sum,
  weighted_sum,
  log_softmax,
  custom,
};

const char* to_string(OpKind kind);

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  const ArrayX& value() const;
  Eigen::Map<const MatrixX> matrix() const;
  /// Gradient of the last backward root with respect to this value.
  const ArrayX& grad() const;
  Real item() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode AD record. Nodes are appended in execution order, which is a
/// topological order of the computation; backward() walks them in reverse and
/// visits each node exactly once.
class Tape {
 public:
  /// Receives the output gradient and one slot per input; a slot is null when
  /// that input does not need a gradient. Rules must accumulate into slots.
  using BackwardFn = std::function<void(const ArrayX& grad_out, std::vector<ArrayX*>& grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(const Tensor& t);
  Var constant(Shape shape, ArrayX values);
  Var constant(const MatrixX& m);
  /// Records a trainable leaf. backward() adds into `t`'s grad slot, so `t`
  /// must outlive the tape.
  Var parameter(Tensor& t);

  /// Appends an op node. Used by the built-in primitives and available for
  /// extension ops.
  Var record(OpKind kind, std::vector<Var> inputs, Shape shape, ArrayX value, BackwardFn backward);

  /// Propagates d(root)/d(node) through the tape. `root` must hold one element.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  /// Node ids in the order the last backward() pass visited them.
  const std::vector<std::size_t>& visit_order() const { return visit_order_; }

 private:
  friend class Var;

  struct Node {
    OpKind kind = OpKind::leaf;
    Shape shape;
    ArrayX value;
    ArrayX grad;
    std::vector<std::size_t> inputs;
    bool needs_grad = false;
    Tensor* target = nullptr;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::size_t> visit_order_;
};

// Primitives. Binary elementwise ops require identical shapes; the only
// broadcast is scalar * tensor via scale() and add_scalar().

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Real alpha);
Var add_scalar(Var a, Real c);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var abs(Var a);
/// Divides each row of a B x d matrix by max(||row||_2, eps).
Var l2_normalize(Var x, Real eps);
/// Stacks two B x d matrices into B x 2 x d (channel 0 = a, channel 1 = b).
Var concat_channels(Var a, Var b);
/// Single-output 1-D convolution of a B x 2 x d input over the length-d axis
/// with a 2 x k kernel (k odd, zero "same" padding) plus a scalar bias of
/// shape {1}. Computes cross-correlation, like most deep learning frameworks.
Var conv1d_mix(Var x, Var kernel, Var bias);
/// Adds a length-n bias to every row of a B x n matrix.
Var add_bias(Var x, Var bias);
Var sum(Var a);
/// sum_i weights_i * a_i with constant weights of the same shape.
Var weighted_sum(Var a, const ArrayX& weights);
/// Row-wise log-softmax of a B x C matrix, via log-sum-exp.
Var log_softmax(Var logits);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Real alpha, Var a) { return scale(a, alpha); }

/// Splits a B x 2 x d tensor back into its two channels.
std::pair<MatrixX, MatrixX> split_channels(const Shape& shape, const ArrayX& values);

}  // namespace rfop
