#include "rfop/gradcheck_suite.hpp"

#include <random>

#include "rfop/losses.hpp"
#include "rfop/model.hpp"

namespace rfop {

namespace {

class InputMaker {
 public:
  explicit InputMaker(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape shape, Real lo = -1.0, Real hi = 1.0) {
    std::uniform_real_distribution<Real> dist(lo, hi);
    Tensor t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t.data[i] = dist(rng_);
    return t;
  }

  /// Magnitudes in [0.2, 2] with random sign, away from kinks at zero.
  Tensor away_from_zero(Shape shape) {
    Tensor t = uniform(std::move(shape), 0.2, 2.0);
    std::bernoulli_distribution flip(0.5);
    for (Index i = 0; i < t.size(); ++i) {
      if (flip(rng_)) t.data[i] = -t.data[i];
    }
    return t;
  }

  ArrayX weights(Index n) { return uniform({n}).data; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<OpCheck> run_gradcheck_suite(double tol, std::uint64_t seed) {
  InputMaker make(seed);
  GradCheckOptions options;
  options.tol = tol;
  std::vector<OpCheck> out;

  // Reduces an op's output to a scalar with random weights so that every
  // output element contributes a distinct amount.
  auto check = [&](std::string name, std::vector<Tensor> params, std::function<Var(std::span<const Var>)> op) {
    Tape probe;
    std::vector<Var> vars;
    for (const Tensor& p : params) vars.push_back(probe.constant(p));
    const ArrayX w = make.weights(static_cast<Index>(op(vars).value().size()));
    TapeProgram f = [op, w](Tape&, std::span<const Var> in) { return weighted_sum(op(in), w); };
    out.push_back({std::move(name), grad_check(f, params, options)});
  };

  check("matmul", {make.uniform({3, 4}), make.uniform({4, 2})}, [](auto in) { return matmul(in[0], in[1]); });
  check("transpose", {make.uniform({3, 4})}, [](auto in) { return transpose(in[0]); });
  check("add", {make.uniform({3, 4}), make.uniform({3, 4})}, [](auto in) { return add(in[0], in[1]); });
  check("sub", {make.uniform({3, 4}), make.uniform({3, 4})}, [](auto in) { return sub(in[0], in[1]); });
  check("mul", {make.uniform({3, 4}), make.uniform({3, 4})}, [](auto in) { return mul(in[0], in[1]); });
  check("scale", {make.uniform({3, 4})}, [](auto in) { return scale(in[0], 1.7); });
  check("add_scalar", {make.uniform({3, 4})}, [](auto in) { return add_scalar(in[0], -0.3); });
  check("tanh", {make.uniform({3, 4}, -2.0, 2.0)}, [](auto in) { return tanh(in[0]); });
  check("sigmoid", {make.uniform({3, 4}, -3.0, 3.0)}, [](auto in) { return sigmoid(in[0]); });
  check("relu", {make.away_from_zero({3, 4})}, [](auto in) { return relu(in[0]); });
  check("abs", {make.away_from_zero({3, 4})}, [](auto in) { return abs(in[0]); });
  check("l2_normalize", {make.uniform({3, 4})}, [](auto in) { return l2_normalize(in[0], 1e-12); });
  check("concat_channels", {make.uniform({3, 4}), make.uniform({3, 4})},
        [](auto in) { return concat_channels(in[0], in[1]); });
  check("conv1d_mix(k=1)", {make.uniform({2, 2, 5}), make.uniform({2, 1}), make.uniform({1})},
        [](auto in) { return conv1d_mix(in[0], in[1], in[2]); });
  check("conv1d_mix(k=3)", {make.uniform({2, 2, 5}), make.uniform({2, 3}), make.uniform({1})},
        [](auto in) { return conv1d_mix(in[0], in[1], in[2]); });
  check("add_bias", {make.uniform({3, 4}), make.uniform({4})}, [](auto in) { return add_bias(in[0], in[1]); });
  check("sum", {make.uniform({3, 4})}, [](auto in) { return sum(in[0]); });
  check("weighted_sum", {make.uniform({3, 4})}, [](auto in) { return in[0]; });
  check("log_softmax", {make.uniform({3, 5}, -2.0, 2.0)}, [](auto in) { return log_softmax(in[0]); });

  const std::vector<Index> labels{0, 0, 1, 1, 2};
  check("mse_alignment", {make.uniform({5, 4}), make.uniform({5, 4})},
        [](auto in) { return mse_alignment({in[0], in[1]}); });
  check("opl", {make.uniform({5, 4})}, [labels](auto in) { return opl(in[0], labels); });
  check("cross_entropy", {make.uniform({5, 3}, -2.0, 2.0)},
        [labels](auto in) { return cross_entropy(in[0], labels); });

  // Full network and weighted objective on a 4-sample batch.
  ModelConfig cfg;
  cfg.face_dim = 6;
  cfg.voice_dim = 5;
  cfg.latent_dim = 4;
  cfg.num_identities = 3;
  cfg.conv_kernel = 3;
  cfg.seed = seed;
  RFOPParams init = init_params(cfg);
  // Non-zero biases so their gradients are exercised away from the origin.
  init.face_bias = make.uniform({4}, -0.5, 0.5);
  init.voice_bias = make.uniform({4}, -0.5, 0.5);
  init.fusion_bias = make.uniform({1}, -0.5, 0.5);
  init.classifier_bias = make.uniform({3}, -0.5, 0.5);
  std::vector<Tensor> model_params;
  for (const auto& [name, t] : init.named()) model_params.push_back(*t);
  const Tensor face = make.uniform({4, 6});
  const Tensor voice = make.uniform({4, 5});
  const std::vector<Index> batch_labels{0, 0, 1, 2};
  const LossWeights weights;
  TapeProgram full = [face, voice, batch_labels, weights](Tape& tape, std::span<const Var> p) {
    const BoundParams bound{p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]};
    const ForwardOutput fw = forward(bound, tape.constant(face), tape.constant(voice));
    return total_loss(fw, batch_labels, weights).total;
  };
  out.push_back({"rfop_model+total_loss", grad_check(full, model_params, options)});
  return out;
}

}  // namespace rfop
