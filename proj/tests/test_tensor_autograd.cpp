#include <doctest.h>

#include <cmath>

#include "rfop/grad_check.hpp"
#include "rfop/tape.hpp"
#include "test_support.hpp"

using namespace rfop;
using rfop::test::central_difference;
using rfop::test::random_tensor;

TEST_CASE("tensor invariants") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK((t.data == 0).all());
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, ArrayX::Zero(3)), ShapeError);
  t.grad_or_zero()[0] = 1.0;
  CHECK(t.grad->size() == t.size());
  t.zero_grad();
  CHECK((*t.grad == 0).all());
}

TEST_CASE("matmul forward cases") {
  Tape tape;
  Var a = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var eye = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  Var zero = tape.constant(Tensor::zeros({2, 2}));
  CHECK((matmul(a, eye).value() == a.value()).all());
  CHECK((matmul(a, zero).value() == 0).all());
}

TEST_CASE("matmul rejects mismatched shapes and names both") {
  Tape tape;
  Var a = tape.constant(Tensor::zeros({2, 3}));
  Var b = tape.constant(Tensor::zeros({2, 3}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x3] * [2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum(A B)") {
  // Frozen from central differences at h = 1e-5: dA = [[3,5]], dB = [[1],[2]].
  Tensor a = Tensor::matrix(1, 2, {1, 2});
  Tensor b = Tensor::matrix(2, 1, {3, 5});
  Tape tape;
  tape.backward(sum(matmul(tape.parameter(a), tape.parameter(b))));
  CHECK((*a.grad - ArrayX::Map(std::array<double, 2>{3, 5}.data(), 2)).abs().maxCoeff() < 1e-12);
  CHECK((*b.grad - ArrayX::Map(std::array<double, 2>{1, 2}.data(), 2)).abs().maxCoeff() < 1e-12);

  auto f = [](const ArrayX& x) {
    return x[0] * x[2] + x[1] * x[3];  // sum of [x0 x1] * [x2; x3]
  };
  ArrayX x(4);
  x << 1, 2, 3, 5;
  const ArrayX fd = central_difference(f, x);
  CHECK(std::abs(fd[0] - 3) < 1e-8);
  CHECK(std::abs(fd[3] - 2) < 1e-8);
}

TEST_CASE("elementwise forward cases") {
  Tape tape;
  Var zero = tape.constant(Tensor::zeros({1}));
  CHECK(tanh(zero).item() == 0.0);
  CHECK(sigmoid(zero).item() == 0.5);
  Var x = tape.constant(Tensor::vector({-1, 2}));
  CHECK(relu(x).value()[0] == 0.0);
  CHECK(relu(x).value()[1] == 2.0);
  CHECK_THROWS_AS(add(x, zero), ShapeError);
  CHECK_THROWS_AS(mul(x, zero), ShapeError);

  Var big = tape.constant(Tensor::vector({-800, 800}));
  const ArrayX s = sigmoid(big).value();
  CHECK(s.allFinite());
  CHECK(s[0] == doctest::Approx(0.0));
  CHECK(s[1] == 1.0);
}

TEST_CASE("tanh derivative at 0.5 matches finite differences") {
  Tensor x = Tensor::vector({0.5});
  Tape tape;
  tape.backward(sum(tanh(tape.parameter(x))));
  const double expected = 1.0 - std::tanh(0.5) * std::tanh(0.5);
  const ArrayX fd = central_difference([](const ArrayX& v) { return std::tanh(v[0]); }, x.data);
  CHECK(std::abs((*x.grad)[0] - expected) < 1e-14);
  CHECK(std::abs(fd[0] - expected) < 1e-9);
}

TEST_CASE("l2_normalize cases") {
  Tape tape;
  Var v = l2_normalize(tape.constant(Tensor::matrix(1, 2, {3, 4})), 1e-12);
  CHECK(v.value()[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(v.value()[1] == doctest::Approx(0.8).epsilon(1e-15));
  Var z = l2_normalize(tape.constant(Tensor::zeros({1, 3})), 1e-12);
  CHECK((z.value() == 0).all());
  CHECK_THROWS(l2_normalize(z, 0.0));

  // sum(x / ||x||) is stationary along the diagonal: both the analytic and
  // the central-difference gradient at [1, 1] vanish.
  Tensor x = Tensor::matrix(1, 2, {1, 1});
  Tape t2;
  t2.backward(sum(l2_normalize(t2.parameter(x), 1e-12)));
  const ArrayX fd = central_difference(
      [](const ArrayX& p) { return (p[0] + p[1]) / std::sqrt(p[0] * p[0] + p[1] * p[1]); }, x.data);
  CHECK(x.grad->abs().maxCoeff() < 1e-15);
  CHECK(fd.abs().maxCoeff() < 1e-8);

  // Away from the stationary point the two agree tightly.
  Tensor y = Tensor::matrix(1, 2, {1, 2});
  Tape t3;
  t3.backward(sum(l2_normalize(t3.parameter(y), 1e-12)));
  const ArrayX fd2 = central_difference(
      [](const ArrayX& p) { return (p[0] + p[1]) / std::sqrt(p[0] * p[0] + p[1] * p[1]); }, y.data);
  CHECK((*y.grad - fd2).abs().maxCoeff() < 1e-9);
}

TEST_CASE("l2_normalize output norms") {
  std::mt19937_64 rng(3);
  Tape tape;
  Var n = l2_normalize(tape.constant(random_tensor(rng, {20, 5})), 1e-12);
  const VectorX norms = n.matrix().rowwise().norm();
  CHECK((norms.array() - 1.0).abs().maxCoeff() < 1e-14);
  Var small = l2_normalize(tape.constant(Tensor::filled({1, 2}, 1e-14)), 1e-12);
  CHECK(small.matrix().norm() <= 1.0);
}

TEST_CASE("concat_channels layout and split round trip") {
  Tape tape;
  Var a = tape.constant(Tensor::matrix(1, 2, {1, 2}));
  Var b = tape.constant(Tensor::matrix(1, 2, {3, 4}));
  Var c = concat_channels(a, b);
  CHECK(c.shape() == Shape{1, 2, 2});
  CHECK(c.value()[0] == 1);
  CHECK(c.value()[1] == 2);
  CHECK(c.value()[2] == 3);
  CHECK(c.value()[3] == 4);
  Var same = concat_channels(a, a);
  CHECK((same.value().head(2) == same.value().tail(2)).all());
  CHECK_THROWS_AS(concat_channels(a, tape.constant(Tensor::zeros({1, 3}))), ShapeError);

  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor x = random_tensor(rng, {4, 6});
    const Tensor y = random_tensor(rng, {4, 6});
    Var cat = concat_channels(tape.constant(x), tape.constant(y));
    auto [sx, sy] = split_channels(cat.shape(), cat.value());
    CHECK(sx == x.as_matrix());
    CHECK(sy == y.as_matrix());
  }

  Tensor pa = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  Tensor pb = Tensor::matrix(2, 3, {6, 5, 4, 3, 2, 1});
  Tape t2;
  t2.backward(sum(concat_channels(t2.parameter(pa), t2.parameter(pb))));
  CHECK((*pa.grad == 1).all());
  CHECK((*pb.grad == 1).all());
}

TEST_CASE("conv1d_mix cases") {
  Tape tape;
  Var a = tape.constant(Tensor::matrix(1, 3, {1, 2, 3}));
  Var b = tape.constant(Tensor::matrix(1, 3, {4, 5, 6}));
  Var x = concat_channels(a, b);

  Var id = conv1d_mix(x, tape.constant(Tensor::matrix(2, 1, {1, 0})), tape.constant(Tensor::vector({0})));
  CHECK((id.value() == a.value()).all());

  Var ones = conv1d_mix(x, tape.constant(Tensor::zeros({2, 3})), tape.constant(Tensor::vector({1})));
  CHECK(ones.shape() == Shape{1, 3});
  CHECK((ones.value() == 1).all());

  CHECK_THROWS_AS(conv1d_mix(x, tape.constant(Tensor::zeros({2, 2})), tape.constant(Tensor::vector({0}))),
                  ShapeError);

  // k = 3 against a direct zero-padded cross-correlation.
  Var k3 = conv1d_mix(x, tape.constant(Tensor::matrix(2, 3, {1, 2, 3, -1, 0, 1})), tape.constant(Tensor::vector({0.5})));
  // out[i] = 0.5 + sum_j K0[j] a[i+j-1] + K1[j] b[i+j-1]
  const double expected[3] = {0.5 + (2 * 1 + 3 * 2) + (0 * 4 + 1 * 5),
                              0.5 + (1 * 1 + 2 * 2 + 3 * 3) + (-1 * 4 + 0 * 5 + 1 * 6),
                              0.5 + (1 * 2 + 2 * 3) + (-1 * 5 + 0 * 6)};
  for (int i = 0; i < 3; ++i) CHECK(k3.value()[i] == doctest::Approx(expected[i]).epsilon(1e-15));
}

TEST_CASE("conv1d_mix with k=1 equals the closed form on random inputs") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const Tensor ch0 = random_tensor(rng, {3, 7});
    const Tensor ch1 = random_tensor(rng, {3, 7});
    const Tensor kernel = random_tensor(rng, {2, 1});
    const Tensor bias = random_tensor(rng, {1});
    Tape tape;
    Var out = conv1d_mix(concat_channels(tape.constant(ch0), tape.constant(ch1)), tape.constant(kernel),
                         tape.constant(bias));
    const ArrayX closed = kernel.data[0] * ch0.data + kernel.data[1] * ch1.data + bias.data[0];
    CHECK((out.value() - closed).abs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("backward semantics") {
  Tensor x = Tensor::vector({1, 2, 3});
  Tensor unused = Tensor::vector({7, 8});
  Tape tape;
  Var xv = tape.parameter(x);
  tape.parameter(unused);
  tape.backward(sum(mul(xv, xv)));
  CHECK((*x.grad == ArrayX::LinSpaced(3, 2, 6)).all());
  CHECK((*unused.grad == 0).all());

  // A second backward accumulates.
  Tape again;
  again.backward(sum(mul(again.parameter(x), again.parameter(x))));
  CHECK((*x.grad == ArrayX::LinSpaced(3, 4, 12)).all());

  Tape t3;
  CHECK_THROWS_AS(t3.backward(t3.constant(Tensor::zeros({2}))), ShapeError);
}

TEST_CASE("tape order is topological and backward visits each node once in reverse") {
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tape tape;
  Var av = tape.parameter(a);
  Var root = sum(mul(tanh(av), add(av, av)));
  for (std::size_t id = 0; id < tape.size(); ++id) {
    for (std::size_t in : tape.inputs(id)) CHECK(in < id);
  }
  tape.backward(root);
  const auto& order = tape.visit_order();
  REQUIRE(order.size() == tape.size());
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == tape.size() - 1 - i);
}

TEST_CASE("backward is linear in the root") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const Tensor x0 = random_tensor(rng, {3, 4});
    const double alpha = 0.7, beta = -1.3;
    auto grads = [&](int which) {
      Tensor x = x0;
      Tape tape;
      Var v = tape.parameter(x);
      Var f = sum(tanh(v));
      Var g = sum(mul(v, sigmoid(v)));
      Var root = which == 0 ? f : which == 1 ? g : add(scale(f, alpha), scale(g, beta));
      tape.backward(root);
      return ArrayX(*x.grad);
    };
    const ArrayX combined = grads(2);
    const ArrayX expected = alpha * grads(0) + beta * grads(1);
    CHECK((combined - expected).abs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("determinism of forward and backward") {
  std::mt19937_64 rng(8);
  const Tensor x0 = random_tensor(rng, {4, 4});
  auto run = [&] {
    Tensor x = x0;
    Tape tape;
    Var v = tape.parameter(x);
    Var root = sum(l2_normalize(matmul(v, transpose(tanh(v))), 1e-12));
    tape.backward(root);
    return std::make_pair(root.item(), ArrayX(*x.grad));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK((a.second == b.second).all());
}

namespace {

using UnaryOp = std::function<Var(Var)>;

double max_rel_error_vs_fd(const UnaryOp& op, const Tensor& x0, const ArrayX& weights) {
  Tensor x = x0;
  Tape tape;
  tape.backward(weighted_sum(op(tape.parameter(x)), weights));
  const ArrayX fd = central_difference(
      [&](const ArrayX& v) {
        Tape t;
        return weighted_sum(op(t.constant(x0.shape, v)), weights).item();
      },
      x0.data);
  double worst = 0.0;
  for (Index i = 0; i < fd.size(); ++i) {
    const double scale = std::max(std::abs(fd[i]), std::abs((*x.grad)[i]));
    if (scale < 1e-8) continue;
    worst = std::max(worst, std::abs(fd[i] - (*x.grad)[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("every unary-style primitive matches finite differences on 100 random inputs") {
  std::mt19937_64 rng(1234);
  const std::vector<std::pair<std::string, UnaryOp>> ops = {
      {"tanh", [](Var v) { return tanh(v); }},
      {"sigmoid", [](Var v) { return sigmoid(v); }},
      {"relu", [](Var v) { return relu(v); }},
      {"abs", [](Var v) { return abs(v); }},
      {"scale", [](Var v) { return scale(v, -2.5); }},
      {"add_scalar", [](Var v) { return add_scalar(v, 0.25); }},
      {"transpose", [](Var v) { return transpose(v); }},
      {"l2_normalize", [](Var v) { return l2_normalize(v, 1e-12); }},
      {"log_softmax", [](Var v) { return log_softmax(v); }},
      {"sum", [](Var v) { return sum(v); }},
      {"matmul", [](Var v) { return matmul(v, transpose(v)); }},
      {"add", [](Var v) { return add(v, tanh(v)); }},
      {"sub", [](Var v) { return sub(v, sigmoid(v)); }},
      {"mul", [](Var v) { return mul(v, v); }},
      {"concat_channels", [](Var v) { return concat_channels(v, tanh(v)); }},
      {"add_bias", [](Var v) {
         Tape& t = v.tape();
         return add_bias(v, t.constant(Tensor::vector({0.1, -0.2, 0.3})));
       }},
      {"conv1d_mix(k=3)", [](Var v) {
         Tape& t = v.tape();
         return conv1d_mix(concat_channels(v, mul(v, v)), t.constant(Tensor::matrix(2, 3, {0.3, -0.5, 0.8, 0.1, 0.9, -0.4})),
                           t.constant(Tensor::vector({0.2})));
       }},
  };
  for (const auto& [name, op] : ops) {
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      Tensor x = random_tensor(rng, {2, 3}, 0.1, 1.5);
      std::bernoulli_distribution flip(0.5);
      for (Index i = 0; i < x.size(); ++i) {
        if (flip(rng)) x.data[i] = -x.data[i];
      }
      Tape probe;
      const Index n = op(probe.constant(x)).value().size();
      const ArrayX w = random_tensor(rng, {n}).data;
      worst = std::max(worst, max_rel_error_vs_fd(op, x, w));
    }
    INFO(name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("grad_check cases") {
  std::mt19937_64 rng(2);
  const std::vector<Tensor> params{random_tensor(rng, {3, 3})};
  const auto linear = grad_check([](Tape&, std::span<const Var> p) { return sum(p[0]); }, params);
  CHECK(linear.pass);
  CHECK(linear.max_rel_err < 1e-9);

  // Negative control: an op whose backward rule is deliberately wrong.
  TapeProgram corrupted = [](Tape& tape, std::span<const Var> p) {
    Var x = p[0];
    Var sq = tape.record(OpKind::custom, {x}, x.shape(), x.value().square(),
                         [xv = x.value()](const ArrayX& g, std::vector<ArrayX*>& in) {
                           if (in[0]) *in[0] += g * xv;  // should be 2 * x
                         });
    return sum(sq);
  };
  const auto bad = grad_check(corrupted, params);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_rel_err > 0.1);

  const std::vector<Tensor> nan_params{Tensor::filled({2}, std::nan(""))};
  const auto nonfinite = grad_check([](Tape&, std::span<const Var> p) { return sum(p[0]); }, nan_params);
  CHECK_FALSE(nonfinite.pass);
  CHECK_FALSE(nonfinite.error.empty());
}
