#include "fidel/archs.hpp"

namespace fidel {

Model make_fcnn(const Shape& input_shape, Activation hidden, double dropout_rate,
                std::uint64_t seed) {
  std::vector<LayerSpec> layers;
  layers.push_back(LayerSpec::dense(128, hidden));
  if (dropout_rate > 0.0) layers.push_back(LayerSpec::dropout(dropout_rate));
  layers.push_back(LayerSpec::dense(128, Activation::ReLU));
  layers.push_back(LayerSpec::dense(64, Activation::ReLU));
  layers.push_back(LayerSpec::dense(10, Activation::Softmax));
  return build_model(input_shape, std::move(layers), seed);
}

Model make_cnn(const Shape& input_shape, Activation hidden, double dropout_rate,
               std::uint64_t seed) {
  std::vector<LayerSpec> layers;
  layers.push_back(LayerSpec::conv2d(3, 32, Padding::Valid, Activation::None));
  layers.push_back(LayerSpec::maxpool2d(2));
  layers.push_back(LayerSpec::flatten());
  layers.push_back(LayerSpec::dense(128, hidden));
  if (dropout_rate > 0.0) layers.push_back(LayerSpec::dropout(dropout_rate));
  layers.push_back(LayerSpec::dense(64, Activation::ReLU));
  layers.push_back(LayerSpec::dense(10, Activation::Softmax));
  return build_model(input_shape, std::move(layers), seed);
}

Model make_gray_generator(std::uint64_t seed) {
  std::vector<LayerSpec> layers;
  layers.push_back(LayerSpec::upsample2d(2));                                     // 26x26x32
  layers.push_back(LayerSpec::conv2d(5, 20, Padding::Valid, Activation::ReLU));   // 22x22x20
  layers.push_back(LayerSpec::upsample2d(2));                                     // 44x44x20
  layers.push_back(LayerSpec::conv2d(5, 10, Padding::Valid, Activation::ReLU, 2));  // 20x20x10
  layers.push_back(LayerSpec::flatten());
  layers.push_back(LayerSpec::dense(784, Activation::Sigmoid));
  layers.push_back(LayerSpec::reshape({28, 28, 1}));
  return build_model({13, 13, 32}, std::move(layers), seed);
}

Model make_rgb_generator(std::uint64_t seed) {
  std::vector<LayerSpec> layers;
  layers.push_back(
      LayerSpec::conv_transpose2d(5, 128, 1, Padding::Same, Activation::ReLU));      // 15x15x128
  layers.push_back(
      LayerSpec::conv_transpose2d(5, 64, 2, Padding::Same, Activation::ReLU, 2));    // 32x32x64
  layers.push_back(LayerSpec::batchnorm());
  layers.push_back(
      LayerSpec::conv_transpose2d(5, 64, 1, Padding::Same, Activation::ReLU));       // 32x32x64
  layers.push_back(LayerSpec::conv2d(3, 32, Padding::Same, Activation::Tanh));       // 32x32x32
  layers.push_back(LayerSpec::conv2d(3, 3, Padding::Same, Activation::Sigmoid));     // 32x32x3
  return build_model({15, 15, 32}, std::move(layers), seed);
}

}  // namespace fidel
