#ifndef FIDEL_LAYERS_HPP_
#define FIDEL_LAYERS_HPP_

#include <cstdint>
#include <string>

#include "fidel/tensor.hpp"

namespace fidel {

enum class Activation : std::uint8_t { None = 0, ReLU, Sigmoid, Tanh, Softmax };
enum class Padding : std::uint8_t { Valid = 0, Same };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Declarative layer description. Kind-specific fields are zero when unused.
struct LayerSpec {
  enum class Kind : std::uint8_t {
    Dense = 0,
    Conv2D,
    MaxPool2D,
    Flatten,
    Reshape,
    Dropout,
    Upsample2D,
    ConvTranspose2D,
    BatchNorm
  };

  Kind kind = Kind::Dense;
  Activation activation = Activation::None;
  std::size_t units = 0;     // Dense
  std::size_t kernel = 0;    // Conv2D / ConvTranspose2D (square)
  std::size_t channels = 0;  // Conv2D / ConvTranspose2D output channels
  std::size_t stride = 1;    // Conv2D / ConvTranspose2D
  Padding padding = Padding::Valid;
  std::size_t pool = 0;        // MaxPool2D (square window, stride = pool)
  double rate = 0.0;           // Dropout
  Shape target_shape;          // Reshape (per-sample shape)
  std::size_t factor = 0;      // Upsample2D (nearest)
  std::size_t out_extra = 0;   // ConvTranspose2D: extra rows/cols appended bottom/right

  static LayerSpec dense(std::size_t units, Activation a);
  static LayerSpec conv2d(std::size_t kernel, std::size_t channels, Padding p, Activation a,
                          std::size_t stride = 1);
  static LayerSpec conv_transpose2d(std::size_t kernel, std::size_t channels, std::size_t stride,
                                    Padding p, Activation a, std::size_t out_extra = 0);
  static LayerSpec maxpool2d(std::size_t pool);
  static LayerSpec flatten();
  static LayerSpec reshape(Shape target);
  static LayerSpec dropout(double rate);
  static LayerSpec upsample2d(std::size_t factor);
  static LayerSpec batchnorm();

  const char* kind_name() const;

  // Per-sample output shape; throws std::invalid_argument naming the layer
  // when the input shape is incompatible.
  Shape output_shape(const Shape& in, std::size_t layer_index) const;

  bool has_weights() const {
    return kind == Kind::Dense || kind == Kind::Conv2D || kind == Kind::ConvTranspose2D ||
           kind == Kind::BatchNorm;
  }
};

}  // namespace fidel

#endif  // FIDEL_LAYERS_HPP_
