#include "rfop/losses.hpp"

#include <cmath>

namespace rfop {

void LossWeights::validate() const {
  for (double a : {mse, op, ce}) {
    if (!std::isfinite(a) || a < 0) {
      throw ConfigError("loss weights must be finite and non-negative");
    }
  }
}

Var mse_alignment(const LatentPair& latent) {
  Var diff = sub(latent.face, latent.voice);
  return scale(sum(mul(diff, diff)), 1.0 / static_cast<Real>(diff.value().size()));
}

Var opl(Var fused, std::span<const Index> labels, Real eps) {
  if (fused.shape().size() != 2) {
    throw ShapeError("opl: expected B x d embeddings, got " + to_string(fused.shape()));
  }
  const Index batch = fused.shape()[0];
  if (batch < 2) {
    throw std::invalid_argument("opl: needs at least 2 embeddings, got " + std::to_string(batch));
  }
  if (static_cast<Index>(labels.size()) != batch) {
    throw ShapeError("opl: " + std::to_string(labels.size()) + " labels for " + std::to_string(batch) + " rows");
  }

  // Upper-triangle masks over the B x B Gram matrix.
  ArrayX same = ArrayX::Zero(batch * batch);
  ArrayX diff = ArrayX::Zero(batch * batch);
  Index n_same = 0, n_diff = 0;
  for (Index i = 0; i < batch; ++i) {
    for (Index j = i + 1; j < batch; ++j) {
      if (labels[i] == labels[j]) {
        same[i * batch + j] = 1.0;
        ++n_same;
      } else {
        diff[i * batch + j] = 1.0;
        ++n_diff;
      }
    }
  }

  Var unit = l2_normalize(fused, eps);
  Var gram = matmul(unit, transpose(unit));
  Var loss;
  if (n_same > 0) {
    Var s = weighted_sum(gram, same / static_cast<Real>(n_same));
    loss = add_scalar(scale(s, -1.0), 1.0);
  }
  if (n_diff > 0) {
    Var dv = weighted_sum(abs(gram), diff / static_cast<Real>(n_diff));
    loss = loss.valid() ? add(loss, dv) : dv;
  }
  return loss;
}

Var cross_entropy(Var logits, std::span<const Index> labels) {
  if (logits.shape().size() != 2) {
    throw ShapeError("cross_entropy: expected B x C logits, got " + to_string(logits.shape()));
  }
  const Index batch = logits.shape()[0], classes = logits.shape()[1];
  if (static_cast<Index>(labels.size()) != batch) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(batch) +
                     " rows");
  }
  ArrayX pick = ArrayX::Zero(batch * classes);
  for (Index i = 0; i < batch; ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    pick[i * classes + labels[i]] = -1.0 / static_cast<Real>(batch);
  }
  return weighted_sum(log_softmax(logits), pick);
}

LossTerms total_loss(const ForwardOutput& out, std::span<const Index> labels, const LossWeights& w) {
  LossTerms t;
  t.mse = mse_alignment(out.latent);
  t.op = opl(out.fused, labels);
  t.ce = cross_entropy(out.logits, labels);
  t.total = add(add(scale(t.mse, w.mse), scale(t.op, w.op)), scale(t.ce, w.ce));
  return t;
}

double combine_losses(const LossWeights& w, double mse, double op, double ce) {
  return w.mse * mse + w.op * op + w.ce * ce;
}

}  // namespace rfop
