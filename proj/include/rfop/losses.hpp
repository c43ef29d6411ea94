#pragma once

#include <span>
#include <vector>

#include "rfop/model.hpp"

namespace rfop {

struct LossWeights {
  double mse = 0.02;
  double op = 0.78;
  double ce = 0.2;

  void validate() const;
};

/// Identity indices in [0, C) for the rows of a batch.
using BatchLabels = std::vector<Index>;

/// Mean over all B*d entries of (Xf - Xv)^2, on raw latents.
Var mse_alignment(const LatentPair& latent);

/// Orthogonal projection loss on row-normalised fused embeddings:
/// (1 - mean same-identity cosine) + mean |cross-identity cosine|.
/// A pair set that is empty drops its term.
Var opl(Var fused, std::span<const Index> labels, Real eps = 1e-12);

/// Mean negative log-likelihood of the true class under softmax(logits).
Var cross_entropy(Var logits, std::span<const Index> labels);

struct LossTerms {
  Var total;
  Var mse;
  Var op;
  Var ce;
};

LossTerms total_loss(const ForwardOutput& out, std::span<const Index> labels, const LossWeights& w);

/// w.mse * mse + w.op * op + w.ce * ce on plain numbers.
double combine_losses(const LossWeights& w, double mse, double op, double ce);

}  // namespace rfop
