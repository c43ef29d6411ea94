#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "rfop/checkpoint.hpp"
#include "rfop/model.hpp"
#include "test_support.hpp"

using namespace rfop;
using rfop::test::naive_matmul;
using rfop::test::random_tensor;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.face_dim = 6;
  cfg.voice_dim = 5;
  cfg.latent_dim = 4;
  cfg.num_identities = 3;
  cfg.conv_kernel = 3;
  cfg.seed = 17;
  return cfg;
}

/// Zero projection weights, identity-like routing kernel and zero biases.
RFOPParams zero_params(Index df, Index dv, Index d, Index k) {
  RFOPParams p;
  p.face_weight = Tensor::zeros({d, df});
  p.face_bias = Tensor::zeros({d});
  p.voice_weight = Tensor::zeros({d, dv});
  p.voice_bias = Tensor::zeros({d});
  p.fusion_kernel = Tensor::zeros({2, k});
  p.fusion_bias = Tensor::zeros({1});
  p.classifier_weight = Tensor::zeros({2, d});
  p.classifier_bias = Tensor::zeros({2});
  return p;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("init is seeded, bounded and has zero biases") {
  const ModelConfig cfg = small_config();
  const RFOPParams a = init_params(cfg);
  const RFOPParams b = init_params(cfg);
  CHECK(a == b);
  ModelConfig other = cfg;
  other.seed = 18;
  CHECK_FALSE(a == init_params(other));

  CHECK(a.face_weight.shape == Shape{4, 6});
  CHECK(a.voice_weight.shape == Shape{4, 5});
  CHECK(a.fusion_kernel.shape == Shape{2, 3});
  CHECK(a.classifier_weight.shape == Shape{3, 4});
  CHECK(a.face_weight.data.abs().maxCoeff() <= 1.0 / std::sqrt(6.0));
  CHECK(a.voice_weight.data.abs().maxCoeff() <= 1.0 / std::sqrt(5.0));
  CHECK(a.classifier_weight.data.abs().maxCoeff() <= 1.0 / std::sqrt(4.0));
  CHECK((a.face_bias.data == 0).all());
  CHECK((a.voice_bias.data == 0).all());
  CHECK((a.fusion_bias.data == 0).all());
  CHECK((a.classifier_bias.data == 0).all());
  CHECK(a.shape_config().latent_dim == 4);

  ModelConfig even = cfg;
  even.conv_kernel = 2;
  CHECK_THROWS_AS(init_params(even), ConfigError);
}

TEST_CASE("project cases") {
  RFOPParams p = zero_params(3, 3, 3, 1);
  p.face_bias = Tensor::vector({1, 2, 3});
  Tape tape;
  BoundParams bp = bind_constants(tape, p);
  Var f = tape.constant(Tensor::matrix(2, 3, {5, 6, 7, 8, 9, 10}));
  LatentPair z = project(bp, f, f);
  for (Index r = 0; r < 2; ++r) {
    CHECK(z.face.matrix()(r, 0) == 1);
    CHECK(z.face.matrix()(r, 2) == 3);
  }
  CHECK((z.voice.value() == 0).all());

  p.voice_weight = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tape t2;
  LatentPair z2 = project(bind_constants(t2, p), t2.constant(Tensor::matrix(1, 3, {1, 2, 3})),
                          t2.constant(Tensor::matrix(1, 3, {1, 2, 3})));
  CHECK((z2.voice.value() == ArrayX::LinSpaced(3, 1, 3)).all());

  Tape t3;
  CHECK_THROWS_AS(project(bind_constants(t3, p), t3.constant(Tensor::zeros({2, 3})), t3.constant(Tensor::zeros({3, 3}))),
                  ShapeError);
  CHECK_THROWS_AS(project(bind_constants(t3, p), t3.constant(Tensor::zeros({2, 4})), t3.constant(Tensor::zeros({2, 3}))),
                  ShapeError);
}

TEST_CASE("project against a hand-written matmul") {
  std::mt19937_64 rng(4);
  const RFOPParams p = init_params(small_config());
  const Tensor f = random_tensor(rng, {5, 6});
  const Tensor v = random_tensor(rng, {5, 5});
  Tape tape;
  LatentPair z = project(bind_constants(tape, p), tape.constant(f), tape.constant(v));
  const MatrixX expected = naive_matmul(f.as_matrix(), p.face_weight.as_matrix().transpose());
  CHECK((z.face.matrix() - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((project_face(p, f.as_matrix()) - expected).cwiseAbs().maxCoeff() < 1e-12);
  const MatrixX expected_v = naive_matmul(v.as_matrix(), p.voice_weight.as_matrix().transpose());
  CHECK((project_voice(p, v.as_matrix()) - expected_v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fuse cases") {
  RFOPParams p = zero_params(2, 2, 2, 1);
  p.fusion_bias = Tensor::vector({0.25});
  Tape tape;
  BoundParams bp = bind_constants(tape, p);

  // Zero latents: w = 0.5 and the output is the bias.
  FusionOutput zero = fuse({tape.constant(Tensor::zeros({1, 2})), tape.constant(Tensor::zeros({1, 2}))}, bp);
  CHECK((zero.attention.value() == 0.5).all());
  CHECK((zero.fused.value() == 0.25).all());

  // Unit latents: w = sigmoid(2 tanh 1).
  FusionOutput ones = fuse({tape.constant(Tensor::filled({1, 2}, 1.0)), tape.constant(Tensor::filled({1, 2}, 1.0))}, bp);
  const double w = sigmoid(2 * std::tanh(1.0));
  CHECK(ones.attention.value()[0] == doctest::Approx(w).epsilon(1e-14));
  CHECK(2 * std::tanh(1.0) == doctest::Approx(1.5232).epsilon(1e-4));

  // Kernel [1, 0] routes the attended face channel through.
  p.fusion_kernel = Tensor::matrix(2, 1, {1, 0});
  p.fusion_bias = Tensor::vector({0});
  Tape t2;
  BoundParams route = bind_constants(t2, p);
  Var xf = t2.constant(Tensor::matrix(1, 2, {0.3, -0.7}));
  Var xv = t2.constant(Tensor::matrix(1, 2, {1.1, 0.2}));
  FusionOutput r = fuse({xf, xv}, route);
  CHECK((r.fused.value() - r.attention.value() * xf.value()).abs().maxCoeff() < 1e-15);
}

TEST_CASE("fuse properties on random inputs") {
  std::mt19937_64 rng(9);
  RFOPParams p = init_params(small_config());
  for (int rep = 0; rep < 50; ++rep) {
    const Tensor xf = random_tensor(rng, {3, 4}, -5, 5);
    const Tensor xv = random_tensor(rng, {3, 4}, -5, 5);
    Tape tape;
    BoundParams bp = bind_constants(tape, p);
    FusionOutput a = fuse({tape.constant(xf), tape.constant(xv)}, bp);
    FusionOutput b = fuse({tape.constant(xv), tape.constant(xf)}, bp);
    CHECK((a.attention.value() > 0).all());
    CHECK((a.attention.value() < 1).all());
    CHECK((a.attention.value() == b.attention.value()).all());
  }

  // k = 1 fusion is w * (a Xf + b Xv) + c.
  RFOPParams q = p;
  q.fusion_kernel = Tensor::matrix(2, 1, {0.6, -1.4});
  q.fusion_bias = Tensor::vector({0.3});
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor xf = random_tensor(rng, {3, 4});
    const Tensor xv = random_tensor(rng, {3, 4});
    Tape tape;
    FusionOutput out = fuse({tape.constant(xf), tape.constant(xv)}, bind_constants(tape, q));
    const ArrayX w = 1.0 / (1.0 + (-(xf.data.tanh() + xv.data.tanh())).exp());
    const ArrayX closed = w * (0.6 * xf.data - 1.4 * xv.data) + 0.3;
    CHECK((out.fused.value() - closed).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("classify and forward shapes") {
  RFOPParams p = zero_params(3, 2, 2, 1);
  p.classifier_bias = Tensor::vector({0.5, -0.5});
  Tape tape;
  BoundParams bp = bind_constants(tape, p);
  Var logits = classify(tape.constant(Tensor::zeros({4, 2})), bp);
  CHECK(logits.shape() == Shape{4, 2});
  for (Index r = 0; r < 4; ++r) {
    CHECK(logits.matrix()(r, 0) == 0.5);
    CHECK(logits.matrix()(r, 1) == -0.5);
  }

  std::mt19937_64 rng(1);
  const RFOPParams q = init_params(small_config());
  Tape t2;
  ForwardOutput out = forward(bind_constants(t2, q), t2.constant(random_tensor(rng, {7, 6})),
                              t2.constant(random_tensor(rng, {7, 5})));
  CHECK(out.latent.face.shape() == Shape{7, 4});
  CHECK(out.fused.shape() == Shape{7, 4});
  CHECK(out.logits.shape() == Shape{7, 3});
  CHECK(out.logits.value().allFinite());
}

TEST_CASE("checkpoint round trip") {
  Checkpoint ck{init_params(small_config()), {"L2", 37, 12.5, 99}};
  const std::string bytes = encode_checkpoint(ck);
  CHECK(bytes.rfind("RFOP1", 0) == 0);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.params == ck.params);
  CHECK(back.meta.train_lang == "L2");
  CHECK(back.meta.epoch == 37);
  CHECK(back.meta.val_eer == 12.5);
  CHECK(back.meta.seed == 99);
  CHECK(encode_checkpoint(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "rfop_test_model.ckpt";
  save_checkpoint(path, ck);
  CHECK(load_checkpoint(path).params == ck.params);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects corrupt input") {
  const std::string bytes = encode_checkpoint({init_params(small_config()), {}});
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), DataError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 8)), DataError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 7)), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/rfop.ckpt"), DataError);
}
