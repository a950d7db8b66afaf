#include "fidel/genrec.hpp"

#include <chrono>
#include <numeric>
#include <stdexcept>

namespace fidel {

namespace {

// Forward through every layer before the first dense layer, batched.
Tensor pre_dense_activations(const Model& victim, const Tensor& batch) {
  const FirstDenseInfo info = locate_first_dense(victim);
  if (info.layer_index == 0) return batch;  // FCNN: features are the input itself
  Model head;
  head.input_shape = victim.input_shape;
  head.layers.assign(victim.layers.begin(),
                     victim.layers.begin() + static_cast<std::ptrdiff_t>(info.layer_index));
  head.params.assign(victim.params.begin(),
                     victim.params.begin() + static_cast<std::ptrdiff_t>(info.layer_index));
  const Tensor out = forward(head, batch).output();
  Shape spatial{batch.shape[0]};
  spatial.insert(spatial.end(), info.input_shape.begin(), info.input_shape.end());
  return out.reshaped(spatial);  // undo the flatten so features stay spatial
}

}  // namespace

Tensor victim_features(const Model& victim, const Tensor& sample) {
  Shape s{1};
  s.insert(s.end(), sample.shape.begin(), sample.shape.end());
  const Tensor out = pre_dense_activations(victim, sample.reshaped(s));
  return out.reshaped(Shape(out.shape.begin() + 1, out.shape.end()));
}

std::vector<TrainingPair> build_pairs(const Model& victim, const Dataset& auxiliary) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(auxiliary.size());
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < auxiliary.size(); start += kChunk) {
    const std::size_t end = std::min(auxiliary.size(), start + kChunk);
    std::vector<Tensor> images;
    for (std::size_t i = start; i < end; ++i) images.push_back(auxiliary.samples[i].image);
    const Tensor feats = pre_dense_activations(victim, make_batch(images));
    const Shape per(feats.shape.begin() + 1, feats.shape.end());
    const std::size_t stride = shape_numel(per);
    for (std::size_t i = 0; i < end - start; ++i) {
      TrainingPair p;
      p.features = Tensor(per, std::vector<double>(feats.data.begin() + i * stride,
                                                   feats.data.begin() + (i + 1) * stride));
      p.target = auxiliary.samples[start + i].image;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

TrainedGenerator train_generator(const std::vector<TrainingPair>& pairs, Model generator,
                                 const GeneratorBudget& budget) {
  if (pairs.empty()) throw std::invalid_argument("train_generator: no training pairs");
  TrainedGenerator out;
  out.opt = AdadeltaState::for_model(generator, budget.learning_rate);

  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  Rng rng(mix_seed(budget.seed, 0x33));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  bool stop = false;
  for (std::size_t epoch = 0; epoch < budget.max_epochs && !stop; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += budget.batch_size) {
      const std::size_t end = std::min(order.size(), start + budget.batch_size);
      std::vector<Tensor> feats, targets;
      for (std::size_t i = start; i < end; ++i) {
        feats.push_back(pairs[order[i]].features);
        targets.push_back(pairs[order[i]].target);
      }
      const Tensor in = make_batch(feats);
      const Tensor target = make_batch(targets);
      ActivationTrace trace = forward_train(generator, in, &rng);
      epoch_loss += loss_value(trace.output(), target, Loss::MSE);
      ++batches;
      Gradients grads = backward(generator, trace, target, Loss::MSE);
      adadelta_step(out.opt, generator, grads);
      if (elapsed() > budget.max_seconds) {
        stop = true;
        break;
      }
    }
    out.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
  }
  out.model = std::move(generator);
  return out;
}

Tensor generate(const TrainedGenerator& gen, const Tensor& features) {
  Shape s{1};
  s.insert(s.end(), features.shape.begin(), features.shape.end());
  Tensor batch = features;
  batch.shape = s;
  const Tensor out = forward(gen.model, batch).output();
  return out.reshaped(Shape(out.shape.begin() + 1, out.shape.end()));
}

Tensor generate(const TrainedGenerator& gen, const PartialReconstruction& partial) {
  return generate(gen, partial.values);
}

std::vector<Tensor> generate_batch_candidates(const TrainedGenerator& gen,
                                              const std::vector<PartialReconstruction>& partials) {
  std::vector<Tensor> out;
  for (const PartialReconstruction& p : partials) {
    if (p.dead || p.kind != PartialReconstruction::Kind::Exact) continue;
    out.push_back(generate(gen, p));
  }
  return out;
}

double mean_pixel_mse(const TrainedGenerator& gen, const std::vector<TrainingPair>& pairs) {
  double total = 0.0;
  std::size_t count = 0;
  for (const TrainingPair& p : pairs) {
    const Tensor cand = generate(gen, p.features);
    for (std::size_t i = 0; i < cand.numel(); ++i) {
      const double d = cand.data[i] - p.target.data[i];
      total += d * d;
    }
    count += cand.numel();
  }
  return total / static_cast<double>(count);
}

}  // namespace fidel
