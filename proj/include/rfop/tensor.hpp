#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "rfop/errors.hpp"

namespace rfop {

using Real = double;
using Index = Eigen::Index;
using Shape = std::vector<Index>;

using ArrayX = Eigen::Array<Real, Eigen::Dynamic, 1>;
using VectorX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
/// Row-major so that a B x d tensor maps directly onto its flat storage.
using MatrixX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index num_elements(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of 64-bit reals with an optional gradient slot.
///
/// Gradients accumulate additively during backward passes; call zero_grad()
/// between optimisation steps.
struct Tensor {
  Shape shape;
  ArrayX data;
  bool requires_grad = false;
  std::optional<ArrayX> grad;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, ArrayX values);

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor filled(Shape s, Real value);
  /// Builds a rows x cols tensor from values listed in row-major order.
  static Tensor matrix(Index rows, Index cols, std::initializer_list<Real> values);
  static Tensor vector(std::initializer_list<Real> values);
  static Tensor from_matrix(const MatrixX& m);

  Index size() const { return data.size(); }
  Index rank() const { return static_cast<Index>(shape.size()); }
  Index rows() const;
  Index cols() const;

  Eigen::Map<const MatrixX> as_matrix() const;
  Eigen::Map<MatrixX> as_matrix();

  void zero_grad();
  /// Grad slot, allocated as zeros on first access.
  ArrayX& grad_or_zero();

  bool all_finite() const { return data.allFinite(); }
};

}  // namespace rfop
