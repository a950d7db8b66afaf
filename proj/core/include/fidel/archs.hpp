#ifndef FIDEL_ARCHS_HPP_
#define FIDEL_ARCHS_HPP_

#include "fidel/model.hpp"

namespace fidel {

// Victim classifier: Dense 128 - Dense 128 - Dense 64 - Dense 10 softmax.
// The first hidden activation is configurable; an optional dropout layer
// (after the first dense layer) is inserted when dropout_rate > 0.
Model make_fcnn(const Shape& input_shape, Activation hidden = Activation::ReLU,
                double dropout_rate = 0.0, std::uint64_t seed = 1);

// Victim classifier: Conv 3x3x32 - MaxPool 2x2 - Flatten - Dense 128 -
// Dense 64 - Dense 10 softmax.
Model make_cnn(const Shape& input_shape, Activation hidden = Activation::ReLU,
               double dropout_rate = 0.0, std::uint64_t seed = 1);

// Generator inverting 13x13x32 feature maps back to 28x28x1 images.
Model make_gray_generator(std::uint64_t seed = 1);

// Generator inverting 15x15x32 feature maps back to 32x32x3 images.
// The stride-2 transposed convolution carries two extra output rows/cols so
// the stack composes to the 32x32 sample size.
Model make_rgb_generator(std::uint64_t seed = 1);

}  // namespace fidel

#endif  // FIDEL_ARCHS_HPP_
