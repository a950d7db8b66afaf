#include "fidel/layers.hpp"

#include <stdexcept>

namespace fidel {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "none") return Activation::None;
  if (s == "relu") return Activation::ReLU;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  if (s == "softmax") return Activation::Softmax;
  throw std::invalid_argument("unknown activation: " + s);
}

LayerSpec LayerSpec::dense(std::size_t units, Activation a) {
  LayerSpec s;
  s.kind = Kind::Dense;
  s.units = units;
  s.activation = a;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t kernel, std::size_t channels, Padding p, Activation a,
                            std::size_t stride) {
  LayerSpec s;
  s.kind = Kind::Conv2D;
  s.kernel = kernel;
  s.channels = channels;
  s.padding = p;
  s.activation = a;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::conv_transpose2d(std::size_t kernel, std::size_t channels, std::size_t stride,
                                      Padding p, Activation a, std::size_t out_extra) {
  LayerSpec s;
  s.kind = Kind::ConvTranspose2D;
  s.kernel = kernel;
  s.channels = channels;
  s.stride = stride;
  s.padding = p;
  s.activation = a;
  s.out_extra = out_extra;
  return s;
}

LayerSpec LayerSpec::maxpool2d(std::size_t pool) {
  LayerSpec s;
  s.kind = Kind::MaxPool2D;
  s.pool = pool;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = Kind::Flatten;
  return s;
}

LayerSpec LayerSpec::reshape(Shape target) {
  LayerSpec s;
  s.kind = Kind::Reshape;
  s.target_shape = std::move(target);
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = Kind::Dropout;
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::upsample2d(std::size_t factor) {
  LayerSpec s;
  s.kind = Kind::Upsample2D;
  s.factor = factor;
  return s;
}

LayerSpec LayerSpec::batchnorm() {
  LayerSpec s;
  s.kind = Kind::BatchNorm;
  return s;
}

const char* LayerSpec::kind_name() const {
  switch (kind) {
    case Kind::Dense: return "dense";
    case Kind::Conv2D: return "conv2d";
    case Kind::MaxPool2D: return "maxpool2d";
    case Kind::Flatten: return "flatten";
    case Kind::Reshape: return "reshape";
    case Kind::Dropout: return "dropout";
    case Kind::Upsample2D: return "upsample2d";
    case Kind::ConvTranspose2D: return "conv_transpose2d";
    case Kind::BatchNorm: return "batchnorm";
  }
  return "?";
}

namespace {

[[noreturn]] void bad_shape(const LayerSpec& l, std::size_t idx, const Shape& in,
                            const std::string& why) {
  throw std::invalid_argument("layer " + std::to_string(idx) + " (" + l.kind_name() +
                              "): input shape " + shape_str(in) + " rejected: " + why);
}

}  // namespace

Shape LayerSpec::output_shape(const Shape& in, std::size_t idx) const {
  switch (kind) {
    case Kind::Dense:
      if (in.empty()) bad_shape(*this, idx, in, "empty input");
      return {units};
    case Kind::Conv2D: {
      if (in.size() != 3) bad_shape(*this, idx, in, "expects H x W x C");
      const std::size_t h = in[0], w = in[1];
      if (padding == Padding::Valid) {
        if (h < kernel || w < kernel) bad_shape(*this, idx, in, "smaller than kernel");
        return {(h - kernel) / stride + 1, (w - kernel) / stride + 1, channels};
      }
      return {(h + stride - 1) / stride, (w + stride - 1) / stride, channels};
    }
    case Kind::ConvTranspose2D: {
      if (in.size() != 3) bad_shape(*this, idx, in, "expects H x W x C");
      if (padding == Padding::Valid)
        return {(in[0] - 1) * stride + kernel, (in[1] - 1) * stride + kernel, channels};
      return {in[0] * stride + out_extra, in[1] * stride + out_extra, channels};
    }
    case Kind::MaxPool2D: {
      if (in.size() != 3) bad_shape(*this, idx, in, "expects H x W x C");
      if (in[0] < pool || in[1] < pool) bad_shape(*this, idx, in, "smaller than pool window");
      return {in[0] / pool, in[1] / pool, in[2]};
    }
    case Kind::Flatten:
      return {shape_numel(in)};
    case Kind::Reshape:
      if (shape_numel(in) != shape_numel(target_shape))
        bad_shape(*this, idx, in, "element count differs from target " + shape_str(target_shape));
      return target_shape;
    case Kind::Dropout:
    case Kind::BatchNorm:
      return in;
    case Kind::Upsample2D: {
      if (in.size() != 3) bad_shape(*this, idx, in, "expects H x W x C");
      return {in[0] * factor, in[1] * factor, in[2]};
    }
  }
  bad_shape(*this, idx, in, "unknown layer kind");
}

}  // namespace fidel
