#include "fidel/fed.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fidel/optim.hpp"

namespace fidel {

double ModelUpdate::l2_norm() const {
  double s = 0.0;
  for (const LayerParams& p : delta) {
    for (double v : p.w.data) s += v * v;
    for (double v : p.b.data) s += v * v;
  }
  return std::sqrt(s);
}

namespace {

std::vector<LayerParams> param_difference(const Model& before, const Model& after) {
  std::vector<LayerParams> delta(before.params.size());
  for (std::size_t i = 0; i < before.params.size(); ++i) {
    delta[i].w = after.params[i].w - before.params[i].w;
    delta[i].b = after.params[i].b - before.params[i].b;
    if (!before.params[i].running_mean.empty()) {
      delta[i].running_mean = after.params[i].running_mean - before.params[i].running_mean;
      delta[i].running_var = after.params[i].running_var - before.params[i].running_var;
    }
  }
  return delta;
}

void check_congruent(const Model& a, const Model& b, const char* what) {
  if (a.layers.size() != b.layers.size())
    throw std::invalid_argument(std::string(what) + ": layer count mismatch");
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (!a.params[i].w.same_shape(b.params[i].w) || !a.params[i].b.same_shape(b.params[i].b))
      throw std::invalid_argument(std::string(what) + ": parameter shape mismatch at layer " +
                                  std::to_string(i));
}

// One epoch of minibatch SGD over the given sample order.
void run_epoch(Model& model, std::span<const Sample> data, const std::vector<std::size_t>& order,
               std::size_t batch_size, double lr, Rng& rng) {
  const std::size_t num_classes = model.output_shape().back();
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<Tensor> images;
    std::vector<int> labels;
    images.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      images.push_back(data[order[i]].image);
      labels.push_back(data[order[i]].label);
    }
    const Tensor batch = make_batch(images);
    const Tensor target = one_hot_batch(labels, num_classes);
    ActivationTrace trace = forward_train(model, batch, &rng);
    Gradients grads = backward(model, trace, target, Loss::CategoricalCrossEntropy);
    sgd_step(model, grads, lr);
  }
}

}  // namespace

ClientResult client_train(const Model& global, std::span<const Sample> local,
                          const ClientConfig& cfg) {
  if (local.empty()) throw std::invalid_argument("client_train: empty local dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw std::invalid_argument("client_train: epochs and batch size must be >= 1");

  Model model = global;
  Rng rng(mix_seed(cfg.seed, 0x11));
  std::vector<std::size_t> order(local.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    if (cfg.shuffle) shuffle(order, rng);
    run_epoch(model, local, order, cfg.batch_size, cfg.learning_rate, rng);
  }

  ClientResult res;
  res.update = model_delta(global, model);
  res.update.num_samples = static_cast<std::uint32_t>(local.size());
  res.model = std::move(model);
  return res;
}

ModelUpdate model_delta(const Model& before, const Model& after) {
  check_congruent(before, after, "model_delta");
  for (std::size_t i = 0; i < before.layers.size(); ++i)
    if (before.layers[i].kind != after.layers[i].kind)
      throw std::invalid_argument("model_delta: layer spec mismatch at layer " +
                                  std::to_string(i));
  ModelUpdate u;
  u.delta = param_difference(before, after);
  return u;
}

Model server_aggregate(const std::vector<ModelUpdate>& updates, const Model& base) {
  if (updates.empty()) throw std::invalid_argument("server_aggregate: no updates");
  Model out = base;
  const double scale = 1.0 / static_cast<double>(updates.size());
  for (const ModelUpdate& u : updates) {
    if (u.delta.size() != base.params.size())
      throw std::invalid_argument("server_aggregate: update shape mismatch");
    for (std::size_t i = 0; i < base.params.size(); ++i) {
      if (!u.delta[i].w.same_shape(base.params[i].w))
        throw std::invalid_argument("server_aggregate: update shape mismatch at layer " +
                                    std::to_string(i));
      for (std::size_t j = 0; j < base.params[i].w.numel(); ++j)
        out.params[i].w.data[j] += scale * u.delta[i].w.data[j];
      for (std::size_t j = 0; j < base.params[i].b.numel(); ++j)
        out.params[i].b.data[j] += scale * u.delta[i].b.data[j];
    }
  }
  return out;
}

Model pretrain(Model model, const Dataset& train, std::size_t epochs, std::size_t batch_size,
               double learning_rate, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x22));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t e = 0; e < epochs; ++e) {
    shuffle(order, rng);
    run_epoch(model, std::span<const Sample>(train.samples), order, batch_size, learning_rate,
              rng);
  }
  return model;
}

double evaluate_accuracy(const Model& model, const Dataset& test, std::size_t batch_size) {
  std::size_t correct = 0;
  for (std::size_t start = 0; start < test.size(); start += batch_size) {
    const std::size_t end = std::min(test.size(), start + batch_size);
    std::vector<Tensor> images;
    for (std::size_t i = start; i < end; ++i) images.push_back(test.samples[i].image);
    const Tensor out = forward(model, make_batch(images)).output();
    const std::size_t classes = out.numel() / (end - start);
    for (std::size_t i = 0; i < end - start; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c)
        if (out.data[i * classes + c] > out.data[i * classes + best]) best = c;
      if (static_cast<int>(best) == test.samples[start + i].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

void append_round_log(const std::string& csv_path, const ModelUpdate& update) {
  std::ofstream f(csv_path, std::ios::app);
  if (!f) throw io_error(csv_path + ": cannot open for append");
  f << update.round << "," << update.client_id << "," << update.num_samples << ","
    << update.l2_norm() << "\n";
}

}  // namespace fidel
