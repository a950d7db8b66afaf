#ifndef FIDEL_ATTACK_HPP_
#define FIDEL_ATTACK_HPP_

#include "fidel/fed.hpp"
#include "fidel/model.hpp"

namespace fidel {

// One neuron's candidate view of the first dense layer's input.
struct PartialReconstruction {
  enum class Kind : std::uint8_t {
    Exact,    // delta_w / delta_b, recovers the activation itself
    Unbiased  // delta_w row alone, linear in the activation up to unknown scale
  };

  std::size_t neuron = 0;
  Tensor values;  // reshaped to the dense layer's input shape
  Kind kind = Kind::Unbiased;
  bool dead = false;         // all-zero weight-delta row
  double bias_delta = 0.0;
};

struct FirstDenseInfo {
  std::size_t layer_index = 0;
  Shape input_shape;  // shape feeding the dense layer
};

// Earliest Dense layer and the per-sample shape feeding it; throws when the
// model has no dense layer.
FirstDenseInfo locate_first_dense(const Model& model);

// One partial per neuron of the first dense layer. A neuron yields an exact
// partial when |delta_b| exceeds dead_threshold relative to the largest
// bias delta of the layer, otherwise the raw weight-delta row.
std::vector<PartialReconstruction> extract_partials(const ModelUpdate& update, const Model& model,
                                                    double dead_threshold = 1e-12);

// Most confident single candidate: the exact partial with the largest
// |delta_b|, falling back to the unbiased partial with the largest L2 norm.
const PartialReconstruction& reconstruct_single(
    const std::vector<PartialReconstruction>& partials);

}  // namespace fidel

#endif  // FIDEL_ATTACK_HPP_
