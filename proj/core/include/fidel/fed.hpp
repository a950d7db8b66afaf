#ifndef FIDEL_FED_HPP_
#define FIDEL_FED_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fidel/data.hpp"
#include "fidel/model.hpp"

namespace fidel {

struct ClientConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 50;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  bool shuffle = false;  // attack rounds keep the deterministic sample order
};

// Per-parameter weight difference observed by the server for one client
// round: delta = w_after - w_before.
struct ModelUpdate {
  std::vector<LayerParams> delta;  // running_* buffers carried for batchnorm
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;
  std::uint32_t num_samples = 0;

  double l2_norm() const;
};

struct ClientResult {
  Model model;
  ModelUpdate update;
};

// One client's local training pass: cfg.epochs epochs of minibatch SGD over
// the local dataset (last batch may be smaller). The returned update is the
// exact after-minus-before parameter difference.
ClientResult client_train(const Model& global, std::span<const Sample> local,
                          const ClientConfig& cfg);

ModelUpdate model_delta(const Model& before, const Model& after);

// Unweighted FedAvg: base + mean of deltas.
Model server_aggregate(const std::vector<ModelUpdate>& updates, const Model& base);

// Server-side pretraining: `epochs` epochs of shuffled, seeded minibatch SGD.
Model pretrain(Model model, const Dataset& train, std::size_t epochs, std::size_t batch_size,
               double learning_rate, std::uint64_t seed);

double evaluate_accuracy(const Model& model, const Dataset& test, std::size_t batch_size = 200);

// Appends one "round,client,n,update_l2" line per update.
void append_round_log(const std::string& csv_path, const ModelUpdate& update);

}  // namespace fidel

#endif  // FIDEL_FED_HPP_
