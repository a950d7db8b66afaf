#include <doctest.h>

#include <cmath>

#include "fidel/archs.hpp"
#include "fidel/layers.hpp"
#include "fidel/model.hpp"
#include "fidel/optim.hpp"
#include "test_util.hpp"

using namespace fidel;
using fidel::testutil::random_tensor;

namespace {

// 2-unit dense layer with identity weights for activation probes.
Model identity_dense(Activation act) {
  Model m = build_model({2}, {LayerSpec::dense(2, act)}, 1);
  m.params[0].w.data = {1, 0, 0, 1};
  m.params[0].b.data = {0, 0};
  return m;
}

}  // namespace

TEST_CASE("softmax on symmetric logits splits evenly") {
  Model m = identity_dense(Activation::Softmax);
  const Tensor out = forward(m, Tensor({1, 2}, {0.0, 0.0})).output();
  CHECK(out.data[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.data[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax outputs form a probability simplex") {
  Model m = build_model({6}, {LayerSpec::dense(5, Activation::Softmax)}, 3);
  Rng rng(9);
  const Tensor out = forward(m, random_tensor({4, 6}, rng, -5.0, 5.0)).output();
  for (std::size_t s = 0; s < 4; ++s) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(out.data[s * 5 + c] >= 0.0);
      sum += out.data[s * 5 + c];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("identity dense layer passes input through") {
  Model m = identity_dense(Activation::None);
  const Tensor out = forward(m, Tensor({1, 2}, {3.0, -1.0})).output();
  CHECK(out.data[0] == 3.0);
  CHECK(out.data[1] == -1.0);
}

TEST_CASE("shape mismatch is rejected with a diagnostic") {
  Model m = identity_dense(Activation::None);
  CHECK_THROWS_AS(forward(m, Tensor({1, 3})), std::invalid_argument);
  CHECK_THROWS_AS(build_model({4}, {LayerSpec::maxpool2d(2)}, 1), std::invalid_argument);
}

TEST_CASE("loss examples") {
  CHECK(loss_value(Tensor({1, 2}, {1.0, 0.0}), Tensor({1, 2}, {1.0, 0.0}), Loss::MSE) == 0.0);

  Tensor onehot({1, 10});
  onehot.data[3] = 1.0;
  Tensor sure({1, 10}, std::vector<double>(10, 1e-12));
  sure.data[3] = 1.0;
  CHECK(loss_value(sure, onehot, Loss::CategoricalCrossEntropy) ==
        doctest::Approx(0.0).epsilon(1e-10));

  const Tensor uniform = Tensor::full({1, 10}, 0.1);
  CHECK(loss_value(uniform, onehot, Loss::CategoricalCrossEntropy) ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));

  Tensor not_onehot({1, 10}, std::vector<double>(10, 0.1));
  CHECK_THROWS_AS(loss_value(uniform, not_onehot, Loss::CategoricalCrossEntropy),
                  std::invalid_argument);
}

TEST_CASE("one-neuron closed-form gradient") {
  // h(x) = Wx + b with W=[1], b=0, x=2, target 0, MSE:
  // g_w = 2 h x = 8, g_b = 2 h = 4
  Model m = build_model({1}, {LayerSpec::dense(1, Activation::None)}, 1);
  m.params[0].w.data = {1.0};
  const Tensor x({1, 1}, {2.0});
  const Tensor y({1, 1}, {0.0});
  ActivationTrace t = forward(m, x);
  const Gradients g = backward(m, t, y, Loss::MSE);
  CHECK(g.layers[0].w.data[0] == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(g.layers[0].b.data[0] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("dead relu neuron receives zero gradient") {
  Model m = build_model({1}, {LayerSpec::dense(2, Activation::ReLU)}, 1);
  m.params[0].w.data = {1.0, -1.0};  // neuron 1 pre-activation = -x < 0
  const Tensor x({1, 1}, {2.0});
  const Tensor y({1, 2}, {5.0, 5.0});
  ActivationTrace t = forward(m, x);
  const Gradients g = backward(m, t, y, Loss::MSE);
  CHECK(g.layers[0].w.data[1] == 0.0);
  CHECK(g.layers[0].b.data[1] == 0.0);
  CHECK(g.layers[0].w.data[0] != 0.0);
}

TEST_CASE("sgd step") {
  Model m = build_model({1}, {LayerSpec::dense(1, Activation::None)}, 1);
  m.params[0].w.data = {1.0};
  Gradients g = zero_gradients(m);
  g.layers[0].w.data = {2.0};
  sgd_step(m, g, 0.01);
  CHECK(m.params[0].w.data[0] == doctest::Approx(0.98).epsilon(1e-15));

  const Model before = m;
  sgd_step(m, zero_gradients(m), 0.5);
  CHECK(m.params[0].w.data == before.params[0].w.data);
}

TEST_CASE("adadelta first step and invariants") {
  Model m = build_model({1}, {LayerSpec::dense(1, Activation::None)}, 1);
  m.params[0].w.data = {0.25};
  AdadeltaState st = AdadeltaState::for_model(m);  // lr 0.001, rho 0.95, eps 1e-7

  SUBCASE("zero gradient leaves everything unchanged") {
    adadelta_step(st, m, zero_gradients(m));
    CHECK(m.params[0].w.data[0] == 0.25);
    CHECK(st.acc_grad_sq[0].w.data[0] == 0.0);
    CHECK(st.acc_delta_sq[0].w.data[0] == 0.0);
  }

  SUBCASE("first step matches the hand calculation") {
    Gradients g = zero_gradients(m);
    g.layers[0].w.data = {1.0};
    adadelta_step(st, m, g);
    // step = -sqrt(eps) / sqrt(0.05 + eps) = -1.41421e-3, scaled by lr
    const double step = -std::sqrt(1e-7) / std::sqrt(0.05 + 1e-7);
    CHECK(step == doctest::Approx(-1.4142e-3).epsilon(1e-4));
    CHECK(m.params[0].w.data[0] == doctest::Approx(0.25 + 0.001 * step).epsilon(1e-12));
  }

  SUBCASE("accumulators stay non-negative over random steps") {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
      Gradients g = zero_gradients(m);
      g.layers[0].w.data = {rng.uniform(-3.0, 3.0)};
      g.layers[0].b.data = {rng.uniform(-3.0, 3.0)};
      adadelta_step(st, m, g);
    }
    CHECK(st.acc_grad_sq[0].w.data[0] >= 0.0);
    CHECK(st.acc_delta_sq[0].w.data[0] >= 0.0);
    CHECK(st.acc_grad_sq[0].b.data[0] >= 0.0);
    CHECK(st.acc_delta_sq[0].b.data[0] >= 0.0);
  }
}

TEST_CASE("dropout semantics") {
  Model m = build_model({8}, {LayerSpec::dropout(0.5)}, 1);
  Rng rng(11);
  const Tensor x = random_tensor({3, 8}, rng);

  SUBCASE("inference is the identity") {
    CHECK(forward(m, x, false, nullptr).output().data == x.data);
  }
  SUBCASE("rate zero is the identity even when training") {
    Model id = build_model({8}, {LayerSpec::dropout(0.0)}, 1);
    CHECK(forward(id, x, true, &rng).output().data == x.data);
  }
  SUBCASE("training scales survivors by 1/keep") {
    const Tensor out = forward(m, x, true, &rng).output();
    for (std::size_t i = 0; i < out.numel(); ++i) {
      const bool dropped = out.data[i] == 0.0;
      const bool scaled = out.data[i] == doctest::Approx(2.0 * x.data[i]).epsilon(1e-15);
      CHECK((dropped || scaled));
    }
  }
  SUBCASE("training pass without rng is rejected") {
    CHECK_THROWS_AS(forward(m, x, true, nullptr), std::invalid_argument);
  }
}

TEST_CASE("cnn feeds a 13x13x32 map into the first dense layer") {
  Model m = make_cnn({28, 28, 1});
  // layers: conv, maxpool, flatten, dense...
  Shape s = {28, 28, 1};
  std::size_t flat = 0;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (m.layers[i].kind == LayerSpec::Kind::Dense) break;
    s = m.layers[i].output_shape(s, i);
    if (m.layers[i].kind == LayerSpec::Kind::Flatten) flat = s[0];
  }
  CHECK(flat == 13 * 13 * 32);
}

TEST_CASE("maxpool ties break to the first maximum in row-major order") {
  Model m = build_model({2, 2, 1}, {LayerSpec::maxpool2d(2)}, 1);
  const Tensor x = Tensor::full({1, 2, 2, 1}, 7.0);
  ActivationTrace t = forward(m, x);
  REQUIRE(t.layers[0].argmax.size() == 1);
  CHECK(t.layers[0].argmax[0] == 0);  // flat index of (0,0)
}

TEST_CASE("maxpool backward routes each gradient to exactly one input") {
  Model m = build_model({4, 4, 1},
                        {LayerSpec::conv2d(1, 1, Padding::Valid, Activation::None),
                         LayerSpec::maxpool2d(2), LayerSpec::flatten()},
                        1);
  m.params[0].w.data = {1.0};
  Rng rng(5);
  const Tensor x = random_tensor({1, 4, 4, 1}, rng);
  ActivationTrace t = forward(m, x);
  const Tensor y = Tensor({1, 4});
  const Gradients g = backward(m, t, y, Loss::MSE);
  // conv bias gradient accumulates the four routed output gradients:
  // dL/db = sum over pooled winners of 2*(max - 0)/1
  double expect = 0.0;
  for (std::size_t j = 0; j < 4; ++j) expect += 2.0 * t.output().data[j];
  CHECK(g.layers[0].b.data[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("same seed gives bit-identical models, outputs and gradients") {
  const Model a = make_fcnn({28, 28, 1}, Activation::ReLU, 0.0, 42);
  const Model b = make_fcnn({28, 28, 1}, Activation::ReLU, 0.0, 42);
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    CHECK(a.params[i].w.data == b.params[i].w.data);
    CHECK(a.params[i].b.data == b.params[i].b.data);
  }
  Rng rng(3);
  const Tensor x = random_tensor({2, 28, 28, 1}, rng, 0.0, 1.0);
  const Tensor y = one_hot_batch({1, 7}, 10);
  ActivationTrace ta = forward(a, x);
  ActivationTrace tb = forward(b, x);
  CHECK(ta.output().data == tb.output().data);
  const Gradients ga = backward(a, ta, y, Loss::CategoricalCrossEntropy);
  const Gradients gb = backward(b, tb, y, Loss::CategoricalCrossEntropy);
  for (std::size_t i = 0; i < ga.layers.size(); ++i)
    CHECK(ga.layers[i].w.data == gb.layers[i].w.data);
}
