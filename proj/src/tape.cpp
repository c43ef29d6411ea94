#include "rfop/tape.hpp"

#include <cassert>

namespace rfop {

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::transpose: return "transpose";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::relu: return "relu";
    case OpKind::abs: return "abs";
    case OpKind::l2_normalize: return "l2_normalize";
    case OpKind::concat_channels: return "concat_channels";
    case OpKind::conv1d_mix: return "conv1d_mix";
    case OpKind::add_bias: return "add_bias";
    case OpKind::sum: return "sum";
    case OpKind::weighted_sum: return "weighted_sum";
    case OpKind::log_softmax: return "log_softmax";
    case OpKind::custom: return "custom";
  }
  return "unknown";
}

const Shape& Var::shape() const { return tape_->nodes_[id_].shape; }
const ArrayX& Var::value() const { return tape_->nodes_[id_].value; }

Eigen::Map<const MatrixX> Var::matrix() const {
  const auto& node = tape_->nodes_[id_];
  if (node.shape.size() != 2) {
    throw ShapeError("expected a matrix, got " + to_string(node.shape));
  }
  return Eigen::Map<const MatrixX>(node.value.data(), node.shape[0], node.shape[1]);
}

const ArrayX& Var::grad() const { return tape_->nodes_[id_].grad; }

Real Var::item() const {
  const auto& v = value();
  if (v.size() != 1) {
    throw ShapeError("item() needs a single-element value, got " + to_string(shape()));
  }
  return v[0];
}

Var Tape::constant(const Tensor& t) { return constant(t.shape, t.data); }

Var Tape::constant(Shape shape, ArrayX values) {
  Tensor checked(std::move(shape), std::move(values));
  Node node;
  node.shape = std::move(checked.shape);
  node.value = std::move(checked.data);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(const MatrixX& m) {
  return constant(Shape{m.rows(), m.cols()}, m.reshaped<Eigen::RowMajor>());
}

Var Tape::parameter(Tensor& t) {
  Node node;
  node.shape = t.shape;
  node.value = t.data;
  node.needs_grad = true;
  node.target = &t;
  t.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::vector<Var> inputs, Shape shape, ArrayX value, BackwardFn backward) {
  if (value.size() != num_elements(shape)) {
    throw ShapeError(std::string(to_string(kind)) + ": value size does not match shape " +
                     to_string(shape));
  }
  Node node;
  node.kind = kind;
  node.shape = std::move(shape);
  node.value = std::move(value);
  node.backward = std::move(backward);
#ifndef NDEBUG
  bool inputs_finite = true;
#endif
  for (const Var& in : inputs) {
    if (in.tape_ != this) {
      throw std::invalid_argument(std::string(to_string(kind)) + ": operand recorded on another tape");
    }
    node.inputs.push_back(in.id_);
    node.needs_grad = node.needs_grad || nodes_[in.id_].needs_grad;
#ifndef NDEBUG
    inputs_finite = inputs_finite && nodes_[in.id_].value.allFinite();
#endif
  }
  assert(!inputs_finite || node.value.allFinite());
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var root) {
  if (root.tape_ != this) {
    throw std::invalid_argument("backward: root recorded on another tape");
  }
  const Node& root_node = nodes_[root.id_];
  if (root_node.value.size() != 1) {
    throw ShapeError("backward: root must be a scalar, got shape " + to_string(root_node.shape));
  }
  for (Node& node : nodes_) {
    node.grad = ArrayX::Zero(node.value.size());
  }
  nodes_[root.id_].grad[0] = 1.0;
  visit_order_.clear();

  std::vector<ArrayX*> slots;
  for (std::size_t id = root.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    visit_order_.push_back(id);
    if (!node.needs_grad) continue;
    if (node.target != nullptr) {
      node.target->grad_or_zero() += node.grad;
      continue;
    }
    if (!node.backward) continue;
    slots.clear();
    for (std::size_t in : node.inputs) {
      slots.push_back(nodes_[in].needs_grad ? &nodes_[in].grad : nullptr);
    }
    node.backward(node.grad, slots);
  }
}

}  // namespace rfop
