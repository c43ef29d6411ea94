#include "rfop/tensor.hpp"

#include <sstream>

namespace rfop {

Index num_elements(const Shape& shape) {
  Index n = 1;
  for (Index extent : shape) {
    n *= extent;
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

static void check_shape(const Shape& shape) {
  if (shape.empty()) {
    throw ShapeError("tensor shape must have at least one extent");
  }
  for (Index extent : shape) {
    if (extent <= 0) {
      throw ShapeError("tensor extents must be positive, got " + to_string(shape));
    }
  }
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
  check_shape(shape);
  data = ArrayX::Zero(num_elements(shape));
}

Tensor::Tensor(Shape s, ArrayX values) : shape(std::move(s)), data(std::move(values)) {
  check_shape(shape);
  if (data.size() != num_elements(shape)) {
    throw ShapeError("tensor of shape " + to_string(shape) + " cannot hold " +
                     std::to_string(data.size()) + " values");
  }
}

Tensor Tensor::filled(Shape s, Real value) {
  Tensor t(std::move(s));
  t.data.setConstant(value);
  return t;
}

Tensor Tensor::matrix(Index rows, Index cols, std::initializer_list<Real> values) {
  ArrayX data(static_cast<Index>(values.size()));
  Index i = 0;
  for (Real v : values) data[i++] = v;
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<Real> values) {
  ArrayX data(static_cast<Index>(values.size()));
  Index i = 0;
  for (Real v : values) data[i++] = v;
  const Index n = data.size();
  return Tensor({n}, std::move(data));
}

Tensor Tensor::from_matrix(const MatrixX& m) {
  ArrayX data = m.reshaped<Eigen::RowMajor>();
  return Tensor({m.rows(), m.cols()}, std::move(data));
}

Index Tensor::rows() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + to_string(shape));
  return shape[0];
}

Index Tensor::cols() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + to_string(shape));
  return shape[1];
}

Eigen::Map<const MatrixX> Tensor::as_matrix() const {
  return Eigen::Map<const MatrixX>(data.data(), rows(), cols());
}

Eigen::Map<MatrixX> Tensor::as_matrix() {
  return Eigen::Map<MatrixX>(data.data(), rows(), cols());
}

void Tensor::zero_grad() {
  grad = ArrayX::Zero(data.size());
}

ArrayX& Tensor::grad_or_zero() {
  if (!grad || grad->size() != data.size()) {
    zero_grad();
  }
  return *grad;
}

}  // namespace rfop
