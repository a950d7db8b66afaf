#ifndef FIDEL_GENREC_HPP_
#define FIDEL_GENREC_HPP_

#include "fidel/attack.hpp"
#include "fidel/data.hpp"
#include "fidel/model.hpp"
#include "fidel/optim.hpp"

namespace fidel {

// Auxiliary (feature map, original sample) pair built with the victim model.
struct TrainingPair {
  Tensor features;  // victim activation feeding the first dense layer
  Tensor target;    // the auxiliary sample it came from
};

struct GeneratorBudget {
  std::size_t max_epochs = 50;
  double max_seconds = 600.0;  // wall-clock cap
  std::size_t batch_size = 32;
  double learning_rate = 0.001;  // Adadelta step scale (1.0 = unscaled rule)
  std::uint64_t seed = 1;
};

struct TrainedGenerator {
  Model model;
  AdadeltaState opt;
  std::vector<double> loss_curve;  // epoch-average training MSE
};

// Runs every auxiliary sample through the victim's layers before the first
// dense layer (training flag off) and pairs the activation with the sample.
std::vector<TrainingPair> build_pairs(const Model& victim, const Dataset& auxiliary);

// Computes the pre-dense activation for a single sample.
Tensor victim_features(const Model& victim, const Tensor& sample);

// Adadelta / MSE training of `generator` on the pairs until the epoch or
// wall-clock budget is exhausted.
TrainedGenerator train_generator(const std::vector<TrainingPair>& pairs, Model generator,
                                 const GeneratorBudget& budget);

// Feature tensor (or exact partial) -> sample-space candidate in [0,1].
Tensor generate(const TrainedGenerator& gen, const Tensor& features);
Tensor generate(const TrainedGenerator& gen, const PartialReconstruction& partial);

// One candidate per non-dead exact partial.
std::vector<Tensor> generate_batch_candidates(const TrainedGenerator& gen,
                                              const std::vector<PartialReconstruction>& partials);

// Mean per-pixel squared error of generate(features) against targets.
double mean_pixel_mse(const TrainedGenerator& gen, const std::vector<TrainingPair>& pairs);

}  // namespace fidel

#endif  // FIDEL_GENREC_HPP_
