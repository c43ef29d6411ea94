#include <cmath>

#include "rfop/tape.hpp"

namespace rfop {

namespace {

using MatMap = Eigen::Map<MatrixX>;
using ConstMatMap = Eigen::Map<const MatrixX>;

ConstMatMap as_mat(const ArrayX& a, Index rows, Index cols) { return ConstMatMap(a.data(), rows, cols); }
MatMap as_mat(ArrayX& a, Index rows, Index cols) { return MatMap(a.data(), rows, cols); }

void require_matrix(const char* op, const Var& v) {
  if (v.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix operand, got " + to_string(v.shape()));
  }
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

template <typename Fn, typename Deriv>
Var unary(OpKind kind, Var a, Fn fn, Deriv deriv) {
  ArrayX out = fn(a.value());
  ArrayX d = deriv(a.value(), out);
  return a.tape().record(kind, {a}, a.shape(), std::move(out),
                         [d = std::move(d)](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) *in[0] += g * d;
                         });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const Index m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner extents differ, " + to_string(a.shape()) + " * " + to_string(b.shape()));
  }
  MatrixX c = a.matrix() * b.matrix();
  MatrixX a_val = a.matrix();
  MatrixX b_val = b.matrix();
  return a.tape().record(
      OpKind::matmul, {a, b}, {m, n}, c.reshaped<Eigen::RowMajor>(),
      [a_val = std::move(a_val), b_val = std::move(b_val), m, k, n](const ArrayX& g, std::vector<ArrayX*>& in) {
        ConstMatMap dc = as_mat(g, m, n);
        if (in[0]) as_mat(*in[0], m, k).noalias() += dc * b_val.transpose();
        if (in[1]) as_mat(*in[1], k, n).noalias() += a_val.transpose() * dc;
      });
}

Var transpose(Var a) {
  require_matrix("transpose", a);
  const Index r = a.shape()[0], c = a.shape()[1];
  MatrixX t = a.matrix().transpose();
  return a.tape().record(OpKind::transpose, {a}, {c, r}, t.reshaped<Eigen::RowMajor>(),
                         [r, c](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) as_mat(*in[0], r, c) += as_mat(g, c, r).transpose();
                         });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  return a.tape().record(OpKind::add, {a, b}, a.shape(), a.value() + b.value(),
                         [](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) *in[0] += g;
                           if (in[1]) *in[1] += g;
                         });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  return a.tape().record(OpKind::sub, {a, b}, a.shape(), a.value() - b.value(),
                         [](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) *in[0] += g;
                           if (in[1]) *in[1] -= g;
                         });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  return a.tape().record(OpKind::mul, {a, b}, a.shape(), a.value() * b.value(),
                         [av = a.value(), bv = b.value()](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) *in[0] += g * bv;
                           if (in[1]) *in[1] += g * av;
                         });
}

Var scale(Var a, Real alpha) {
  return a.tape().record(OpKind::scale, {a}, a.shape(), alpha * a.value(),
                         [alpha](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) *in[0] += alpha * g;
                         });
}

Var add_scalar(Var a, Real c) {
  return a.tape().record(OpKind::add_scalar, {a}, a.shape(), a.value() + c,
                         [](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) *in[0] += g;
                         });
}

Var tanh(Var a) {
  return unary(
      OpKind::tanh, a, [](const ArrayX& x) -> ArrayX { return x.tanh(); },
      [](const ArrayX&, const ArrayX& y) -> ArrayX { return 1.0 - y.square(); });
}

Var sigmoid(Var a) {
  return unary(
      OpKind::sigmoid, a,
      [](const ArrayX& x) -> ArrayX {
        // Split by sign so exp() never overflows.
        return x.unaryExpr([](Real v) {
          if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
          const Real e = std::exp(v);
          return e / (1.0 + e);
        });
      },
      [](const ArrayX&, const ArrayX& y) -> ArrayX { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      OpKind::relu, a, [](const ArrayX& x) -> ArrayX { return x.max(0.0); },
      [](const ArrayX& x, const ArrayX&) -> ArrayX { return (x > 0.0).cast<Real>(); });
}

Var abs(Var a) {
  return unary(
      OpKind::abs, a, [](const ArrayX& x) -> ArrayX { return x.abs(); },
      [](const ArrayX& x, const ArrayX&) -> ArrayX {
        return x.unaryExpr([](Real v) { return static_cast<Real>((v > 0) - (v < 0)); });
      });
}

Var l2_normalize(Var x, Real eps) {
  require_matrix("l2_normalize", x);
  if (!(eps > 0)) {
    throw std::invalid_argument("l2_normalize: eps must be positive");
  }
  const Index rows = x.shape()[0], cols = x.shape()[1];
  ConstMatMap in = x.matrix();
  VectorX norms = in.rowwise().norm();
  VectorX denom = norms.cwiseMax(eps);
  MatrixX out = denom.cwiseInverse().asDiagonal() * in;
  // Rows whose norm is below eps are divided by the constant eps, so their
  // Jacobian is just 1/eps.
  Eigen::Array<bool, Eigen::Dynamic, 1> clamped = norms.array() < eps;
  return x.tape().record(
      OpKind::l2_normalize, {x}, x.shape(), out.reshaped<Eigen::RowMajor>(),
      [out, denom, clamped, rows, cols](const ArrayX& g, std::vector<ArrayX*>& in) {
        if (!in[0]) return;
        ConstMatMap gy = as_mat(g, rows, cols);
        auto gx = as_mat(*in[0], rows, cols);
        for (Index r = 0; r < rows; ++r) {
          if (clamped[r]) {
            gx.row(r) += gy.row(r) / denom[r];
          } else {
            const Real proj = gy.row(r).dot(out.row(r));
            gx.row(r) += (gy.row(r) - proj * out.row(r)) / denom[r];
          }
        }
      });
}

Var concat_channels(Var a, Var b) {
  require_matrix("concat_channels", a);
  require_same_shape("concat_channels", a, b);
  const Index batch = a.shape()[0], dim = a.shape()[1];
  ArrayX out(2 * batch * dim);
  for (Index r = 0; r < batch; ++r) {
    out.segment(2 * r * dim, dim) = a.value().segment(r * dim, dim);
    out.segment((2 * r + 1) * dim, dim) = b.value().segment(r * dim, dim);
  }
  return a.tape().record(OpKind::concat_channels, {a, b}, {batch, 2, dim}, std::move(out),
                         [batch, dim](const ArrayX& g, std::vector<ArrayX*>& in) {
                           for (Index r = 0; r < batch; ++r) {
                             if (in[0]) in[0]->segment(r * dim, dim) += g.segment(2 * r * dim, dim);
                             if (in[1]) in[1]->segment(r * dim, dim) += g.segment((2 * r + 1) * dim, dim);
                           }
                         });
}

std::pair<MatrixX, MatrixX> split_channels(const Shape& shape, const ArrayX& values) {
  if (shape.size() != 3 || shape[1] != 2 || values.size() != num_elements(shape)) {
    throw ShapeError("split_channels: expected B x 2 x d, got " + to_string(shape));
  }
  const Index batch = shape[0], dim = shape[2];
  MatrixX a(batch, dim), b(batch, dim);
  for (Index r = 0; r < batch; ++r) {
    a.row(r) = values.segment(2 * r * dim, dim).matrix().transpose();
    b.row(r) = values.segment((2 * r + 1) * dim, dim).matrix().transpose();
  }
  return {std::move(a), std::move(b)};
}

Var conv1d_mix(Var x, Var kernel, Var bias) {
  if (x.shape().size() != 3 || x.shape()[1] != 2) {
    throw ShapeError("conv1d_mix: input must be B x 2 x d, got " + to_string(x.shape()));
  }
  if (kernel.shape().size() != 2 || kernel.shape()[0] != 2) {
    throw ShapeError("conv1d_mix: kernel must be 2 x k, got " + to_string(kernel.shape()));
  }
  if (bias.value().size() != 1) {
    throw ShapeError("conv1d_mix: bias must hold one value, got " + to_string(bias.shape()));
  }
  const Index width = kernel.shape()[1];
  if (width % 2 == 0) {
    throw ShapeError("conv1d_mix: kernel width must be odd, got " + std::to_string(width));
  }
  const Index batch = x.shape()[0], dim = x.shape()[2], pad = (width - 1) / 2;
  const ArrayX& xv = x.value();
  const ArrayX& kv = kernel.value();
  const Real c = bias.value()[0];

  // out[b, i] = c + sum_{ch, j} K[ch, j] * x[b, ch, i + j - pad]
  ArrayX out = ArrayX::Constant(batch * dim, c);
  for (Index b = 0; b < batch; ++b) {
    for (Index ch = 0; ch < 2; ++ch) {
      const Index base = (2 * b + ch) * dim;
      for (Index j = 0; j < width; ++j) {
        const Real w = kv[ch * width + j];
        const Index shift = j - pad;
        const Index lo = std::max<Index>(0, -shift), hi = std::min<Index>(dim, dim - shift);
        if (lo < hi) out.segment(b * dim + lo, hi - lo) += w * xv.segment(base + lo + shift, hi - lo);
      }
    }
  }
  return x.tape().record(
      OpKind::conv1d_mix, {x, kernel, bias}, {batch, dim}, std::move(out),
      [xv, kv, batch, dim, width, pad](const ArrayX& g, std::vector<ArrayX*>& in) {
        for (Index b = 0; b < batch; ++b) {
          for (Index ch = 0; ch < 2; ++ch) {
            const Index base = (2 * b + ch) * dim;
            for (Index j = 0; j < width; ++j) {
              const Index shift = j - pad;
              const Index lo = std::max<Index>(0, -shift), hi = std::min<Index>(dim, dim - shift);
              if (lo >= hi) continue;
              auto gseg = g.segment(b * dim + lo, hi - lo);
              if (in[0]) in[0]->segment(base + lo + shift, hi - lo) += kv[ch * width + j] * gseg;
              if (in[1]) (*in[1])[ch * width + j] += (gseg * xv.segment(base + lo + shift, hi - lo)).sum();
            }
          }
        }
        if (in[2]) (*in[2])[0] += g.sum();
      });
}

Var add_bias(Var x, Var bias) {
  require_matrix("add_bias", x);
  const Index rows = x.shape()[0], cols = x.shape()[1];
  if (bias.value().size() != cols) {
    throw ShapeError("add_bias: bias " + to_string(bias.shape()) + " does not match columns of " +
                     to_string(x.shape()));
  }
  MatrixX out = x.matrix();
  out.rowwise() += bias.value().matrix().transpose();
  return x.tape().record(OpKind::add_bias, {x, bias}, x.shape(), out.reshaped<Eigen::RowMajor>(),
                         [rows, cols](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) *in[0] += g;
                           if (in[1]) *in[1] += as_mat(g, rows, cols).colwise().sum().transpose().array();
                         });
}

Var sum(Var a) {
  ArrayX out(1);
  out[0] = a.value().sum();
  return a.tape().record(OpKind::sum, {a}, {1}, std::move(out),
                         [](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) *in[0] += g[0];
                         });
}

Var weighted_sum(Var a, const ArrayX& weights) {
  if (weights.size() != a.value().size()) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for operand " +
                     to_string(a.shape()));
  }
  ArrayX out(1);
  out[0] = (a.value() * weights).sum();
  return a.tape().record(OpKind::weighted_sum, {a}, {1}, std::move(out),
                         [weights](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) *in[0] += g[0] * weights;
                         });
}

Var log_softmax(Var logits) {
  require_matrix("log_softmax", logits);
  const Index rows = logits.shape()[0], cols = logits.shape()[1];
  MatrixX z = logits.matrix();
  VectorX row_max = z.rowwise().maxCoeff();
  MatrixX shifted = z.colwise() - row_max;
  VectorX lse = shifted.array().exp().rowwise().sum().log().matrix();
  MatrixX out = shifted.colwise() - lse;
  MatrixX probs = out.array().exp().matrix();
  return logits.tape().record(OpKind::log_softmax, {logits}, logits.shape(), out.reshaped<Eigen::RowMajor>(),
                              [probs = std::move(probs), rows, cols](const ArrayX& g, std::vector<ArrayX*>& in) {
                                if (!in[0]) return;
                                ConstMatMap gy = as_mat(g, rows, cols);
                                VectorX gsum = gy.rowwise().sum();
                                as_mat(*in[0], rows, cols) += gy - gsum.asDiagonal() * probs;
                              });
}

}  // namespace rfop
