#include "rfop/model.hpp"

#include <cmath>
#include <random>

namespace rfop {

void ModelConfig::validate() const {
  if (face_dim < 1 || voice_dim < 1 || latent_dim < 1 || num_identities < 1) {
    throw ConfigError("model dimensions must all be at least 1");
  }
  if (conv_kernel < 1 || conv_kernel % 2 == 0) {
    throw ConfigError("conv_kernel must be a positive odd integer, got " + std::to_string(conv_kernel));
  }
}

std::array<std::pair<std::string_view, Tensor*>, RFOPParams::count> RFOPParams::named() {
  return {{{"face_weight", &face_weight},
           {"face_bias", &face_bias},
           {"voice_weight", &voice_weight},
           {"voice_bias", &voice_bias},
           {"fusion_kernel", &fusion_kernel},
           {"fusion_bias", &fusion_bias},
           {"classifier_weight", &classifier_weight},
           {"classifier_bias", &classifier_bias}}};
}

std::array<std::pair<std::string_view, const Tensor*>, RFOPParams::count> RFOPParams::named() const {
  auto mut = const_cast<RFOPParams*>(this)->named();
  std::array<std::pair<std::string_view, const Tensor*>, count> out;
  for (std::size_t i = 0; i < count; ++i) out[i] = {mut[i].first, mut[i].second};
  return out;
}

ModelConfig RFOPParams::shape_config() const {
  ModelConfig cfg;
  cfg.latent_dim = face_weight.shape.at(0);
  cfg.face_dim = face_weight.shape.at(1);
  cfg.voice_dim = voice_weight.shape.at(1);
  cfg.conv_kernel = fusion_kernel.shape.at(1);
  cfg.num_identities = classifier_weight.shape.at(0);
  return cfg;
}

void RFOPParams::zero_grad() {
  for (auto& [name, t] : named()) t->zero_grad();
}

bool RFOPParams::all_finite() const {
  for (const auto& [name, t] : named()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

bool RFOPParams::operator==(const RFOPParams& other) const {
  auto a = named();
  auto b = other.named();
  for (std::size_t i = 0; i < count; ++i) {
    if (a[i].second->shape != b[i].second->shape) return false;
    if ((a[i].second->data != b[i].second->data).any()) return false;
  }
  return true;
}

RFOPParams init_params(const ModelConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&rng](Shape shape, Index fan_in) {
    const Real bound = 1.0 / std::sqrt(static_cast<Real>(fan_in));
    std::uniform_real_distribution<Real> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t.data[i] = dist(rng);
    return t;
  };
  const Index d = cfg.latent_dim;
  RFOPParams p;
  p.face_weight = uniform({d, cfg.face_dim}, cfg.face_dim);
  p.face_bias = Tensor::zeros({d});
  p.voice_weight = uniform({d, cfg.voice_dim}, cfg.voice_dim);
  p.voice_bias = Tensor::zeros({d});
  p.fusion_kernel = uniform({2, cfg.conv_kernel}, 2 * cfg.conv_kernel);
  p.fusion_bias = Tensor::zeros({1});
  p.classifier_weight = uniform({cfg.num_identities, d}, d);
  p.classifier_bias = Tensor::zeros({cfg.num_identities});
  return p;
}

BoundParams bind_parameters(Tape& tape, RFOPParams& params) {
  return {tape.parameter(params.face_weight),       tape.parameter(params.face_bias),
          tape.parameter(params.voice_weight),      tape.parameter(params.voice_bias),
          tape.parameter(params.fusion_kernel),     tape.parameter(params.fusion_bias),
          tape.parameter(params.classifier_weight), tape.parameter(params.classifier_bias)};
}

BoundParams bind_constants(Tape& tape, const RFOPParams& params) {
  return {tape.constant(params.face_weight),       tape.constant(params.face_bias),
          tape.constant(params.voice_weight),      tape.constant(params.voice_bias),
          tape.constant(params.fusion_kernel),     tape.constant(params.fusion_bias),
          tape.constant(params.classifier_weight), tape.constant(params.classifier_bias)};
}

Var linear(Var x, Var weight, Var bias) {
  return add_bias(matmul(x, transpose(weight)), bias);
}

LatentPair project(const BoundParams& p, Var face_feats, Var voice_feats) {
  if (face_feats.shape().size() != 2 || voice_feats.shape().size() != 2 ||
      face_feats.shape()[0] != voice_feats.shape()[0]) {
    throw ShapeError("project: face " + to_string(face_feats.shape()) + " and voice " +
                     to_string(voice_feats.shape()) + " batches must be matrices of equal height");
  }
  return {linear(face_feats, p.face_weight, p.face_bias), linear(voice_feats, p.voice_weight, p.voice_bias)};
}

FusionOutput fuse(const LatentPair& latent, const BoundParams& p) {
  Var w = sigmoid(add(tanh(latent.face), tanh(latent.voice)));
  Var stacked = concat_channels(mul(w, latent.face), mul(w, latent.voice));
  return {w, conv1d_mix(stacked, p.fusion_kernel, p.fusion_bias)};
}

Var classify(Var fused, const BoundParams& p) {
  return linear(fused, p.classifier_weight, p.classifier_bias);
}

ForwardOutput forward(const BoundParams& p, Var face_feats, Var voice_feats) {
  LatentPair latent = project(p, face_feats, voice_feats);
  FusionOutput fusion = fuse(latent, p);
  return {latent, fusion.attention, fusion.fused, classify(fusion.fused, p)};
}

namespace {

MatrixX project_with(const Tensor& weight, const Tensor& bias, const MatrixX& feats, const char* what) {
  if (feats.cols() != weight.shape.at(1)) {
    throw ShapeError(std::string(what) + " features have " + std::to_string(feats.cols()) +
                     " columns, projection expects " + std::to_string(weight.shape.at(1)));
  }
  MatrixX out = feats * weight.as_matrix().transpose();
  out.rowwise() += bias.data.matrix().transpose();
  return out;
}

}  // namespace

MatrixX project_face(const RFOPParams& params, const MatrixX& face_feats) {
  return project_with(params.face_weight, params.face_bias, face_feats, "face");
}

MatrixX project_voice(const RFOPParams& params, const MatrixX& voice_feats) {
  return project_with(params.voice_weight, params.voice_bias, voice_feats, "voice");
}

}  // namespace rfop
