#include <doctest.h>

#include <cmath>
#include <fstream>

#include "fidel/archs.hpp"
#include "fidel/fed.hpp"
#include "fidel/optim.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace fidel;

namespace {

std::vector<Sample> random_local(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.image = fidel::testutil::random_tensor({28, 28, 1}, rng, 0.0, 1.0);
    s.label = static_cast<int>(rng.below(10));
    out.push_back(std::move(s));
  }
  return out;
}

double max_delta_err(const ModelUpdate& u, const Gradients& g, double eta) {
  double worst = 0.0;
  for (std::size_t i = 0; i < u.delta.size(); ++i) {
    for (std::size_t j = 0; j < u.delta[i].w.numel(); ++j)
      worst = std::max(worst, std::fabs(u.delta[i].w.data[j] + eta * g.layers[i].w.data[j]));
    for (std::size_t j = 0; j < u.delta[i].b.numel(); ++j)
      worst = std::max(worst, std::fabs(u.delta[i].b.data[j] + eta * g.layers[i].b.data[j]));
  }
  return worst;
}

}  // namespace

TEST_CASE("single sample, one epoch: delta is minus eta times the gradient") {
  const Model m = make_fcnn({28, 28, 1}, Activation::ReLU, 0.0, 6);
  const auto local = random_local(1, 60);
  ClientConfig cfg;
  cfg.learning_rate = 0.01;
  const ClientResult res = client_train(m, local, cfg);

  ActivationTrace t = forward(m, make_batch({local[0].image}));
  const Gradients g = backward(m, t, one_hot_batch({local[0].label}, 10),
                               Loss::CategoricalCrossEntropy);
  CHECK(max_delta_err(res.update, g, 0.01) < 1e-12);
  CHECK(res.update.num_samples == 1);
}

TEST_CASE("n=10 within one batch: delta is one step on the batch mean gradient") {
  const Model m = make_fcnn({28, 28, 1}, Activation::Sigmoid, 0.0, 7);
  const auto local = random_local(10, 61);
  ClientConfig cfg;
  cfg.batch_size = 50;
  cfg.learning_rate = 0.01;
  const ClientResult res = client_train(m, local, cfg);

  std::vector<Tensor> images;
  std::vector<int> labels;
  for (const Sample& s : local) {
    images.push_back(s.image);
    labels.push_back(s.label);
  }
  ActivationTrace t = forward(m, make_batch(images));
  const Gradients g =
      backward(m, t, one_hot_batch(labels, 10), Loss::CategoricalCrossEntropy);
  CHECK(max_delta_err(res.update, g, 0.01) < 1e-12);
}

TEST_CASE("zero learning rate yields a zero update") {
  const Model m = make_fcnn({28, 28, 1}, Activation::ReLU, 0.0, 8);
  const auto local = random_local(3, 62);
  ClientConfig cfg;
  cfg.learning_rate = 0.0;
  const ClientResult res = client_train(m, local, cfg);
  CHECK(res.update.l2_norm() == 0.0);
}

TEST_CASE("empty local dataset is rejected") {
  const Model m = make_fcnn({28, 28, 1}, Activation::ReLU, 0.0, 8);
  const std::vector<Sample> none;
  CHECK_THROWS_AS(client_train(m, none, ClientConfig{}), std::invalid_argument);
}

TEST_CASE("model_delta") {
  const Model m = make_fcnn({28, 28, 1}, Activation::ReLU, 0.0, 9);

  SUBCASE("identical models give a zero update") {
    CHECK(model_delta(m, m).l2_norm() == 0.0);
  }

  SUBCASE("constant shift gives a constant update") {
    Model shifted = m;
    for (LayerParams& p : shifted.params)
      for (double& v : p.w.data) v += 0.5;
    const ModelUpdate u = model_delta(m, shifted);
    for (const LayerParams& p : u.delta)
      for (double v : p.w.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("composition with client_train is bit-exact") {
    const auto local = random_local(4, 63);
    ClientConfig cfg;
    const ClientResult res = client_train(m, local, cfg);
    const ModelUpdate direct = model_delta(m, res.model);
    for (std::size_t i = 0; i < direct.delta.size(); ++i) {
      CHECK(direct.delta[i].w.data == res.update.delta[i].w.data);
      CHECK(direct.delta[i].b.data == res.update.delta[i].b.data);
    }
  }

  SUBCASE("layer spec mismatch is rejected") {
    const Model other = make_cnn({28, 28, 1});
    CHECK_THROWS_AS(model_delta(m, other), std::invalid_argument);
  }
}

TEST_CASE("server aggregation") {
  const Model base = make_fcnn({28, 28, 1}, Activation::ReLU, 0.0, 10);
  const auto local = random_local(2, 64);
  ClientConfig cfg;
  const ModelUpdate u = client_train(base, local, cfg).update;

  SUBCASE("a single update is applied in full") {
    const Model agg = server_aggregate({u}, base);
    for (std::size_t i = 0; i < base.params.size(); ++i)
      for (std::size_t j = 0; j < base.params[i].w.numel(); ++j)
        CHECK(agg.params[i].w.data[j] ==
              doctest::Approx(base.params[i].w.data[j] + u.delta[i].w.data[j]).epsilon(1e-15));
  }

  SUBCASE("opposite updates cancel") {
    ModelUpdate neg = u;
    for (LayerParams& p : neg.delta) {
      p.w *= -1.0;
      p.b *= -1.0;
    }
    const Model agg = server_aggregate({u, neg}, base);
    for (std::size_t i = 0; i < base.params.size(); ++i)
      for (std::size_t j = 0; j < base.params[i].w.numel(); ++j)
        CHECK(std::fabs(agg.params[i].w.data[j] - base.params[i].w.data[j]) < 1e-15);
  }

  SUBCASE("k identical updates equal one applied update") {
    const Model one = server_aggregate({u}, base);
    const Model three = server_aggregate({u, u, u}, base);
    for (std::size_t i = 0; i < base.params.size(); ++i)
      for (std::size_t j = 0; j < base.params[i].w.numel(); ++j)
        CHECK(three.params[i].w.data[j] ==
              doctest::Approx(one.params[i].w.data[j]).epsilon(1e-12));
  }

  SUBCASE("empty update list is rejected") {
    CHECK_THROWS_AS(server_aggregate({}, base), std::invalid_argument);
  }
}

TEST_CASE("pretraining") {
  const Dataset& train = fidel::testutil::mnist_train();

  SUBCASE("zero epochs leave the model unchanged") {
    const Model m = make_fcnn({28, 28, 1}, Activation::ReLU, 0.0, 11);
    const Model out = pretrain(m, train, 0, 50, 0.01, 1);
    for (std::size_t i = 0; i < m.params.size(); ++i)
      CHECK(out.params[i].w.data == m.params[i].w.data);
  }

  SUBCASE("same seed gives identical parameters") {
    const Model m = make_fcnn({28, 28, 1}, Activation::ReLU, 0.5, 11);
    Dataset small;
    small.samples.assign(train.samples.begin(), train.samples.begin() + 500);
    const Model a = pretrain(m, small, 1, 50, 0.01, 21);
    const Model b = pretrain(m, small, 1, 50, 0.01, 21);
    for (std::size_t i = 0; i < m.params.size(); ++i)
      CHECK(a.params[i].w.data == b.params[i].w.data);
  }

  SUBCASE("one epoch reaches the accuracy regression bound") {
    const double acc = evaluate_accuracy(fidel::testutil::pretrained_fcnn(),
                                         fidel::testutil::mnist_test());
    CHECK(acc > 0.85);
  }
}

TEST_CASE("round log appends one line per update") {
  fidel::testutil::TempDir dir("roundlog");
  const Model m = make_fcnn({28, 28, 1}, Activation::ReLU, 0.0, 12);
  const auto local = random_local(2, 65);
  ModelUpdate u = client_train(m, local, ClientConfig{}).update;
  u.round = 4;
  u.client_id = 2;
  append_round_log(dir.file("log.csv"), u);
  append_round_log(dir.file("log.csv"), u);
  std::ifstream f(dir.file("log.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(f, line)) {
    ++lines;
    CHECK(line.rfind("4,2,2,", 0) == 0);
  }
  CHECK(lines == 2);
}
