#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>

#include "rfop/tape.hpp"

namespace rfop {

struct ModelConfig {
  Index face_dim = 4096;
  Index voice_dim = 512;
  Index latent_dim = 128;
  Index num_identities = 1;
  /// Width of the fusion convolution; must be odd.
  Index conv_kernel = 1;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Learnable weights of the fusion network. Linear layers store their weight
/// as out x in, PyTorch style.
struct RFOPParams {
  Tensor face_weight;        // d x Df
  Tensor face_bias;          // d
  Tensor voice_weight;       // d x Dv
  Tensor voice_bias;         // d
  Tensor fusion_kernel;      // 2 x k
  Tensor fusion_bias;        // 1
  Tensor classifier_weight;  // C x d
  Tensor classifier_bias;    // C

  static constexpr std::size_t count = 8;

  std::array<std::pair<std::string_view, Tensor*>, count> named();
  std::array<std::pair<std::string_view, const Tensor*>, count> named() const;

  ModelConfig shape_config() const;
  void zero_grad();
  bool all_finite() const;
  bool operator==(const RFOPParams& other) const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
RFOPParams init_params(const ModelConfig& cfg);

/// The parameters as they appear on one tape.
struct BoundParams {
  Var face_weight, face_bias, voice_weight, voice_bias;
  Var fusion_kernel, fusion_bias;
  Var classifier_weight, classifier_bias;
};

/// Registers every tensor as a trainable leaf; gradients land in `params`.
BoundParams bind_parameters(Tape& tape, RFOPParams& params);
/// Registers every tensor as a constant (no gradients).
BoundParams bind_constants(Tape& tape, const RFOPParams& params);

struct LatentPair {
  Var face;   // B x d
  Var voice;  // B x d
};

struct FusionOutput {
  Var attention;  // B x d, entries in (0, 1)
  Var fused;      // B x d
};

struct ForwardOutput {
  LatentPair latent;
  Var attention;
  Var fused;
  Var logits;  // B x C
};

/// x W^T + b.
Var linear(Var x, Var weight, Var bias);

LatentPair project(const BoundParams& p, Var face_feats, Var voice_feats);
/// w = sigmoid(tanh(Xf) + tanh(Xv)); fused = conv1d_mix(concat(w*Xf, w*Xv)).
FusionOutput fuse(const LatentPair& latent, const BoundParams& p);
Var classify(Var fused, const BoundParams& p);
ForwardOutput forward(const BoundParams& p, Var face_feats, Var voice_feats);

/// Tape-free latent projections used for scoring.
MatrixX project_face(const RFOPParams& params, const MatrixX& face_feats);
MatrixX project_voice(const RFOPParams& params, const MatrixX& voice_feats);

}  // namespace rfop
