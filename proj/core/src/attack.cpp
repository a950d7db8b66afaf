#include "fidel/attack.hpp"

#include <cmath>
#include <stdexcept>

namespace fidel {

FirstDenseInfo locate_first_dense(const Model& model) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (model.layers[i].kind == LayerSpec::Kind::Dense) {
      FirstDenseInfo info;
      info.layer_index = i;
      // a flatten feeding the dense layer is transparent: report the spatial
      // activation shape it consumed
      const bool after_flatten = i > 0 && model.layers[i - 1].kind == LayerSpec::Kind::Flatten;
      info.input_shape = model.shape_before(after_flatten ? i - 1 : i);
      return info;
    }
  }
  throw std::invalid_argument("locate_first_dense: model has no dense layer");
}

std::vector<PartialReconstruction> extract_partials(const ModelUpdate& update, const Model& model,
                                                    double dead_threshold) {
  const FirstDenseInfo info = locate_first_dense(model);
  if (update.delta.size() != model.params.size())
    throw std::invalid_argument("extract_partials: update not congruent with model");
  const Tensor& dw = update.delta[info.layer_index].w;  // {fan_in, units}
  const Tensor& db = update.delta[info.layer_index].b;  // {units}
  if (!dw.same_shape(model.params[info.layer_index].w))
    throw std::invalid_argument("extract_partials: update not congruent with model");

  const std::size_t fan_in = dw.shape[0];
  const std::size_t units = dw.shape[1];
  const double tau = std::max(db.max_abs() * dead_threshold, 1e-300);

  std::vector<PartialReconstruction> partials;
  partials.reserve(units);
  for (std::size_t u = 0; u < units; ++u) {
    PartialReconstruction p;
    p.neuron = u;
    p.bias_delta = db.data[u];
    p.values = Tensor(info.input_shape);
    const bool live = std::fabs(db.data[u]) > tau;
    bool any_weight = false;
    for (std::size_t i = 0; i < fan_in; ++i) {
      const double d = dw.data[i * units + u];
      any_weight = any_weight || d != 0.0;
      p.values.data[i] = live ? d / db.data[u] : d;
    }
    p.kind = live ? PartialReconstruction::Kind::Exact : PartialReconstruction::Kind::Unbiased;
    p.dead = !live && !any_weight;
    partials.push_back(std::move(p));
  }
  return partials;
}

const PartialReconstruction& reconstruct_single(
    const std::vector<PartialReconstruction>& partials) {
  if (partials.empty()) throw std::invalid_argument("reconstruct_single: no partials");
  const PartialReconstruction* best_exact = nullptr;
  const PartialReconstruction* best_unbiased = nullptr;
  double best_bias = -1.0, best_norm = -1.0;
  for (const PartialReconstruction& p : partials) {
    if (p.kind == PartialReconstruction::Kind::Exact) {
      if (std::fabs(p.bias_delta) > best_bias) {
        best_bias = std::fabs(p.bias_delta);
        best_exact = &p;
      }
    } else {
      const double n = p.values.l2_norm();
      if (n > best_norm) {
        best_norm = n;
        best_unbiased = &p;
      }
    }
  }
  return best_exact ? *best_exact : *best_unbiased;
}

}  // namespace fidel
