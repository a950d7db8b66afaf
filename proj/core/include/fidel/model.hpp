#ifndef FIDEL_MODEL_HPP_
#define FIDEL_MODEL_HPP_

#include <cstdint>
#include <vector>

#include "fidel/layers.hpp"
#include "fidel/rng.hpp"
#include "fidel/tensor.hpp"

namespace fidel {

// Trainable parameters of one layer. Dense/conv layers use w and b;
// batchnorm uses w = gamma, b = beta plus running statistics buffers
// that the optimizers never touch. Weightless layers keep all empty.
struct LayerParams {
  Tensor w;
  Tensor b;
  Tensor running_mean;
  Tensor running_var;
};

struct Gradients {
  std::vector<LayerParams> layers;  // running_* unused
};

struct Model {
  Shape input_shape;  // per-sample shape
  std::vector<LayerSpec> layers;
  std::vector<LayerParams> params;
  std::uint64_t rng_seed = 0;

  // Per-sample output shape of layer i (input_shape for i == npos).
  Shape shape_before(std::size_t layer_index) const;
  Shape output_shape() const;
};

// Builds a model with Glorot-uniform weights, zero biases; deterministic in
// the seed. Validates layer composition (throws on incompatible shapes or a
// non-final Softmax).
Model build_model(Shape input_shape, std::vector<LayerSpec> layers, std::uint64_t seed);

struct LayerCache {
  Tensor pre;                       // linear output, before activation
  Tensor post;                      // after activation / the layer output
  Tensor mask;                      // dropout keep-scale per element
  std::vector<std::size_t> argmax;  // maxpool winner flat index per output
  Tensor bn_xhat;                   // batchnorm normalized input
  Tensor bn_inv_std;                // per-channel 1/sqrt(var+eps)
};

struct ActivationTrace {
  Tensor input;  // batch, shape {N, ...sample}
  bool training = false;
  std::vector<LayerCache> layers;
  const Tensor& output() const { return layers.back().post; }
};

// Batch forward pass. `input` is {N, ...sample shape}. Dropout masks are
// drawn from `rng` only when training is set; pass nullptr when not training
// or when the model has no dropout layers.
ActivationTrace forward(const Model& model, const Tensor& input, bool training = false,
                        Rng* rng = nullptr);

// Training-mode forward that also updates batchnorm running statistics.
ActivationTrace forward_train(Model& model, const Tensor& input, Rng* rng);

enum class Loss : std::uint8_t { MSE = 0, CategoricalCrossEntropy };

// MSE: per-sample sum of squared error, averaged over the batch.
// CCE: -sum(target * log(output)), averaged over the batch; requires a
// strictly positive output and one-hot targets.
double loss_value(const Tensor& output, const Tensor& target, Loss kind);

// Gradient of the batch-mean loss w.r.t. every parameter.
Gradients backward(const Model& model, const ActivationTrace& trace, const Tensor& target,
                   Loss kind);

Gradients zero_gradients(const Model& model);

// Stacks per-sample tensors into one {N, ...} batch.
Tensor make_batch(const std::vector<Tensor>& samples);
Tensor one_hot_batch(const std::vector<int>& labels, std::size_t num_classes);

}  // namespace fidel

#endif  // FIDEL_MODEL_HPP_
