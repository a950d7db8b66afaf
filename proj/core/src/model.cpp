#include "fidel/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fidel {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.99;

Shape with_batch(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

Shape sample_shape(const Tensor& batch) {
  return Shape(batch.shape.begin() + 1, batch.shape.end());
}

// Padding offset of a same-padded convolution; extra pixel goes bottom/right.
std::size_t same_pad_begin(std::size_t in, std::size_t k, std::size_t s) {
  const std::size_t out = (in + s - 1) / s;
  const std::size_t total = std::max<std::ptrdiff_t>(
      0, static_cast<std::ptrdiff_t>((out - 1) * s + k) - static_cast<std::ptrdiff_t>(in));
  return total / 2;
}

// Rows/cols cropped off the top/left of a transposed convolution's full
// output; the larger half is cropped bottom/right.
std::size_t convt_crop_begin(std::size_t in, std::size_t k, std::size_t s, std::size_t out) {
  const std::size_t full = (in - 1) * s + k;
  if (full < out)
    throw std::invalid_argument("conv_transpose2d: requested output exceeds full output");
  return (full - out) / 2;
}

void apply_activation(Activation a, const Tensor& pre, Tensor& post) {
  post = pre;
  switch (a) {
    case Activation::None:
      break;
    case Activation::ReLU:
      for (double& v : post.data) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::Sigmoid:
      for (double& v : post.data) v = 1.0 / (1.0 + std::exp(-v));
      break;
    case Activation::Tanh:
      for (double& v : post.data) v = std::tanh(v);
      break;
    case Activation::Softmax: {
      const std::size_t n = pre.shape[0];
      const std::size_t d = pre.numel() / n;
      for (std::size_t i = 0; i < n; ++i) {
        double* row = post.data.data() + i * d;
        double m = row[0];
        for (std::size_t j = 1; j < d; ++j) m = std::max(m, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          row[j] = std::exp(row[j] - m);
          sum += row[j];
        }
        for (std::size_t j = 0; j < d; ++j) row[j] /= sum;
      }
      break;
    }
  }
}

// d(post)/d(pre) applied in place to the incoming gradient.
void activation_backward(Activation a, const LayerCache& cache, Tensor& grad) {
  switch (a) {
    case Activation::None:
      break;
    case Activation::ReLU:
      for (std::size_t i = 0; i < grad.numel(); ++i)
        if (cache.pre.data[i] <= 0.0) grad.data[i] = 0.0;
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < grad.numel(); ++i) {
        const double p = cache.post.data[i];
        grad.data[i] *= p * (1.0 - p);
      }
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < grad.numel(); ++i) {
        const double p = cache.post.data[i];
        grad.data[i] *= 1.0 - p * p;
      }
      break;
    case Activation::Softmax:
      throw std::logic_error("softmax backward is fused with cross-entropy");
  }
}

}  // namespace

Shape Model::shape_before(std::size_t layer_index) const {
  Shape s = input_shape;
  for (std::size_t i = 0; i < layer_index && i < layers.size(); ++i)
    s = layers[i].output_shape(s, i);
  return s;
}

Shape Model::output_shape() const { return shape_before(layers.size()); }

Model build_model(Shape input_shape, std::vector<LayerSpec> layers, std::uint64_t seed) {
  Model m;
  m.input_shape = std::move(input_shape);
  m.layers = std::move(layers);
  m.rng_seed = seed;
  Rng rng(mix_seed(seed, 0));

  Shape s = m.input_shape;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    if (l.activation == Activation::Softmax && i + 1 != m.layers.size())
      throw std::invalid_argument("softmax is only supported on the final layer");
    const Shape out = l.output_shape(s, i);

    LayerParams p;
    switch (l.kind) {
      case LayerSpec::Kind::Dense: {
        const std::size_t fan_in = shape_numel(s);
        const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + l.units));
        p.w = Tensor({fan_in, l.units});
        for (double& v : p.w.data) v = rng.uniform(-lim, lim);
        p.b = Tensor({l.units});
        break;
      }
      case LayerSpec::Kind::Conv2D:
      case LayerSpec::Kind::ConvTranspose2D: {
        const std::size_t in_c = s[2];
        const std::size_t fan_in = l.kernel * l.kernel * in_c;
        const std::size_t fan_out = l.kernel * l.kernel * l.channels;
        const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        p.w = Tensor({l.kernel, l.kernel, in_c, l.channels});
        for (double& v : p.w.data) v = rng.uniform(-lim, lim);
        p.b = Tensor({l.channels});
        break;
      }
      case LayerSpec::Kind::BatchNorm: {
        const std::size_t c = s.back();
        p.w = Tensor::full({c}, 1.0);
        p.b = Tensor({c});
        p.running_mean = Tensor({c});
        p.running_var = Tensor::full({c}, 1.0);
        break;
      }
      default:
        break;
    }
    m.params.push_back(std::move(p));
    s = out;
  }
  return m;
}

Gradients zero_gradients(const Model& model) {
  Gradients g;
  g.layers.resize(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (model.layers[i].has_weights()) {
      g.layers[i].w = Tensor(model.params[i].w.shape);
      g.layers[i].b = Tensor(model.params[i].b.shape);
    }
  }
  return g;
}

namespace {

Tensor dense_forward(const Tensor& in, const LayerParams& p) {
  const std::size_t n = in.shape[0];
  const std::size_t fan_in = p.w.shape[0];
  const std::size_t units = p.w.shape[1];
  Tensor out({n, units});
  for (std::size_t s = 0; s < n; ++s) {
    const double* x = in.data.data() + s * fan_in;
    double* o = out.data.data() + s * units;
    for (std::size_t u = 0; u < units; ++u) o[u] = p.b.data[u];
    for (std::size_t i = 0; i < fan_in; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* wr = p.w.data.data() + i * units;
      for (std::size_t u = 0; u < units; ++u) o[u] += xi * wr[u];
    }
  }
  return out;
}

void dense_backward(const Tensor& in, const LayerParams& p, const Tensor& dpre, Tensor& din,
                    LayerParams& g) {
  const std::size_t n = in.shape[0];
  const std::size_t fan_in = p.w.shape[0];
  const std::size_t units = p.w.shape[1];
  din = Tensor(in.shape);
  for (std::size_t s = 0; s < n; ++s) {
    const double* x = in.data.data() + s * fan_in;
    const double* d = dpre.data.data() + s * units;
    double* dx = din.data.data() + s * fan_in;
    for (std::size_t u = 0; u < units; ++u) g.b.data[u] += d[u];
    for (std::size_t i = 0; i < fan_in; ++i) {
      const double* wr = p.w.data.data() + i * units;
      double* gw = g.w.data.data() + i * units;
      const double xi = x[i];
      double acc = 0.0;
      for (std::size_t u = 0; u < units; ++u) {
        gw[u] += xi * d[u];
        acc += wr[u] * d[u];
      }
      dx[i] = acc;
    }
  }
}

Tensor conv2d_forward(const Tensor& in, const LayerSpec& l, const LayerParams& p,
                      const Shape& out_sample) {
  const std::size_t n = in.shape[0], h = in.shape[1], w = in.shape[2], c = in.shape[3];
  const std::size_t oh = out_sample[0], ow = out_sample[1], oc = out_sample[2];
  const std::size_t k = l.kernel, st = l.stride;
  const std::size_t pad_h = l.padding == Padding::Same ? same_pad_begin(h, k, st) : 0;
  const std::size_t pad_w = l.padding == Padding::Same ? same_pad_begin(w, k, st) : 0;
  Tensor out({n, oh, ow, oc});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double* o = &out.at4(s, oy, ox, 0);
        for (std::size_t f = 0; f < oc; ++f) o[f] = p.b.data[f];
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * st + ky) -
                                    static_cast<std::ptrdiff_t>(pad_h);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * st + kx) -
                                      static_cast<std::ptrdiff_t>(pad_w);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const double* xp = in.ptr4(s, iy, ix, 0);
            const double* wr = p.w.data.data() + ((ky * k + kx) * c) * oc;
            for (std::size_t ic = 0; ic < c; ++ic) {
              const double xv = xp[ic];
              if (xv == 0.0) continue;
              const double* wf = wr + ic * oc;
              for (std::size_t f = 0; f < oc; ++f) o[f] += xv * wf[f];
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& in, const LayerSpec& l, const LayerParams& p,
                     const Tensor& dpre, Tensor& din, LayerParams& g) {
  const std::size_t n = in.shape[0], h = in.shape[1], w = in.shape[2], c = in.shape[3];
  const std::size_t oh = dpre.shape[1], ow = dpre.shape[2], oc = dpre.shape[3];
  const std::size_t k = l.kernel, st = l.stride;
  const std::size_t pad_h = l.padding == Padding::Same ? same_pad_begin(h, k, st) : 0;
  const std::size_t pad_w = l.padding == Padding::Same ? same_pad_begin(w, k, st) : 0;
  din = Tensor(in.shape);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double* d = dpre.ptr4(s, oy, ox, 0);
        for (std::size_t f = 0; f < oc; ++f) g.b.data[f] += d[f];
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * st + ky) -
                                    static_cast<std::ptrdiff_t>(pad_h);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * st + kx) -
                                      static_cast<std::ptrdiff_t>(pad_w);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const double* xp = in.ptr4(s, iy, ix, 0);
            double* dxp = &din.at4(s, iy, ix, 0);
            const std::size_t base = ((ky * k + kx) * c) * oc;
            for (std::size_t ic = 0; ic < c; ++ic) {
              const double* wf = p.w.data.data() + base + ic * oc;
              double* gw = g.w.data.data() + base + ic * oc;
              const double xv = xp[ic];
              double acc = 0.0;
              for (std::size_t f = 0; f < oc; ++f) {
                gw[f] += xv * d[f];
                acc += wf[f] * d[f];
              }
              dxp[ic] += acc;
            }
          }
        }
      }
    }
  }
}

Tensor convt2d_forward(const Tensor& in, const LayerSpec& l, const LayerParams& p,
                       const Shape& out_sample) {
  const std::size_t n = in.shape[0], h = in.shape[1], w = in.shape[2], c = in.shape[3];
  const std::size_t oh = out_sample[0], ow = out_sample[1], oc = out_sample[2];
  const std::size_t k = l.kernel, st = l.stride;
  const std::size_t crop_h = l.padding == Padding::Same ? convt_crop_begin(h, k, st, oh) : 0;
  const std::size_t crop_w = l.padding == Padding::Same ? convt_crop_begin(w, k, st, ow) : 0;
  Tensor out({n, oh, ow, oc});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t f = 0; f < oc; ++f) {
      const double bv = p.b.data[f];
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) out.at4(s, oy, ox, f) = bv;
    }
    for (std::size_t iy = 0; iy < h; ++iy) {
      for (std::size_t ix = 0; ix < w; ++ix) {
        const double* xp = in.ptr4(s, iy, ix, 0);
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy * st + ky) -
                                    static_cast<std::ptrdiff_t>(crop_h);
          if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(oh)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(ix * st + kx) -
                                      static_cast<std::ptrdiff_t>(crop_w);
            if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(ow)) continue;
            double* o = &out.at4(s, oy, ox, 0);
            const std::size_t base = ((ky * k + kx) * c) * oc;
            for (std::size_t ic = 0; ic < c; ++ic) {
              const double xv = xp[ic];
              if (xv == 0.0) continue;
              const double* wf = p.w.data.data() + base + ic * oc;
              for (std::size_t f = 0; f < oc; ++f) o[f] += xv * wf[f];
            }
          }
        }
      }
    }
  }
  return out;
}

void convt2d_backward(const Tensor& in, const LayerSpec& l, const LayerParams& p,
                      const Tensor& dpre, Tensor& din, LayerParams& g) {
  const std::size_t n = in.shape[0], h = in.shape[1], w = in.shape[2], c = in.shape[3];
  const std::size_t oh = dpre.shape[1], ow = dpre.shape[2], oc = dpre.shape[3];
  const std::size_t k = l.kernel, st = l.stride;
  const std::size_t crop_h = l.padding == Padding::Same ? convt_crop_begin(h, k, st, oh) : 0;
  const std::size_t crop_w = l.padding == Padding::Same ? convt_crop_begin(w, k, st, ow) : 0;
  din = Tensor(in.shape);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t f = 0; f < oc; ++f) {
      double acc = 0.0;
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) acc += dpre.at4(s, oy, ox, f);
      g.b.data[f] += acc;
    }
    for (std::size_t iy = 0; iy < h; ++iy) {
      for (std::size_t ix = 0; ix < w; ++ix) {
        const double* xp = in.ptr4(s, iy, ix, 0);
        double* dxp = &din.at4(s, iy, ix, 0);
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy * st + ky) -
                                    static_cast<std::ptrdiff_t>(crop_h);
          if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(oh)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(ix * st + kx) -
                                      static_cast<std::ptrdiff_t>(crop_w);
            if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(ow)) continue;
            const double* d = dpre.ptr4(s, oy, ox, 0);
            const std::size_t base = ((ky * k + kx) * c) * oc;
            for (std::size_t ic = 0; ic < c; ++ic) {
              const double* wf = p.w.data.data() + base + ic * oc;
              double* gw = g.w.data.data() + base + ic * oc;
              const double xv = xp[ic];
              double acc = 0.0;
              for (std::size_t f = 0; f < oc; ++f) {
                gw[f] += xv * d[f];
                acc += wf[f] * d[f];
              }
              dxp[ic] += acc;
            }
          }
        }
      }
    }
  }
}

Tensor maxpool_forward(const Tensor& in, std::size_t pool, const Shape& out_sample,
                       std::vector<std::size_t>& argmax) {
  const std::size_t n = in.shape[0], c = in.shape[3];
  const std::size_t oh = out_sample[0], ow = out_sample[1];
  Tensor out({n, oh, ow, c});
  argmax.assign(out.numel(), 0);
  std::size_t oidx = 0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch, ++oidx) {
          double best = -1e308;
          std::size_t best_idx = 0;
          // ties go to the first maximum in row-major scan order
          for (std::size_t py = 0; py < pool; ++py) {
            for (std::size_t px = 0; px < pool; ++px) {
              const std::size_t iy = oy * pool + py, ix = ox * pool + px;
              const std::size_t idx =
                  ((s * in.shape[1] + iy) * in.shape[2] + ix) * c + ch;
              if (in.data[idx] > best) {
                best = in.data[idx];
                best_idx = idx;
              }
            }
          }
          out.data[oidx] = best;
          argmax[oidx] = best_idx;
        }
      }
    }
  }
  return out;
}

struct BnStats {
  Tensor mean, var;  // per channel
};

BnStats bn_batch_stats(const Tensor& in) {
  const std::size_t c = in.shape.back();
  const std::size_t m = in.numel() / c;
  BnStats st{Tensor({c}), Tensor({c})};
  for (std::size_t i = 0; i < in.numel(); ++i) st.mean.data[i % c] += in.data[i];
  for (double& v : st.mean.data) v /= static_cast<double>(m);
  for (std::size_t i = 0; i < in.numel(); ++i) {
    const double d = in.data[i] - st.mean.data[i % c];
    st.var.data[i % c] += d * d;
  }
  for (double& v : st.var.data) v /= static_cast<double>(m);
  return st;
}

Tensor bn_forward(const Tensor& in, const LayerParams& p, const Tensor& mean, const Tensor& var,
                  LayerCache& cache) {
  const std::size_t c = in.shape.back();
  cache.bn_inv_std = Tensor({c});
  for (std::size_t ch = 0; ch < c; ++ch)
    cache.bn_inv_std.data[ch] = 1.0 / std::sqrt(var.data[ch] + kBnEps);
  cache.bn_xhat = Tensor(in.shape);
  Tensor out(in.shape);
  for (std::size_t i = 0; i < in.numel(); ++i) {
    const std::size_t ch = i % c;
    const double xh = (in.data[i] - mean.data[ch]) * cache.bn_inv_std.data[ch];
    cache.bn_xhat.data[i] = xh;
    out.data[i] = p.w.data[ch] * xh + p.b.data[ch];
  }
  return out;
}

void bn_backward(const LayerParams& p, const LayerCache& cache, const Tensor& dpre, bool training,
                 Tensor& din, LayerParams& g) {
  const std::size_t c = dpre.shape.back();
  const std::size_t m = dpre.numel() / c;
  Tensor sum_d({c}), sum_dx({c});
  for (std::size_t i = 0; i < dpre.numel(); ++i) {
    const std::size_t ch = i % c;
    sum_d.data[ch] += dpre.data[i];
    sum_dx.data[ch] += dpre.data[i] * cache.bn_xhat.data[i];
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    g.w.data[ch] += sum_dx.data[ch];
    g.b.data[ch] += sum_d.data[ch];
  }
  din = Tensor(dpre.shape);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < dpre.numel(); ++i) {
    const std::size_t ch = i % c;
    const double scale = p.w.data[ch] * cache.bn_inv_std.data[ch];
    if (training) {
      din.data[i] = scale * (dpre.data[i] - sum_d.data[ch] * inv_m -
                             cache.bn_xhat.data[i] * sum_dx.data[ch] * inv_m);
    } else {
      din.data[i] = scale * dpre.data[i];
    }
  }
}

struct TraceExtra {
  std::vector<BnStats> bn_stats;  // batch stats per batchnorm layer, forward order
  bool training = false;
};

ActivationTrace run_forward(const Model& model, const Tensor& input, bool training, Rng* rng,
                            TraceExtra* extra) {
  if (input.shape.empty() || sample_shape(input) != model.input_shape)
    throw std::invalid_argument("forward: input shape " + shape_str(input.shape) +
                                " does not match model input " + shape_str(model.input_shape) +
                                " (batched)");
  ActivationTrace trace;
  trace.input = input;
  trace.training = training;
  trace.layers.resize(model.layers.size());

  const std::size_t n = input.shape[0];
  const Tensor* cur = &trace.input;
  Shape s = model.input_shape;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    const LayerParams& p = model.params[i];
    LayerCache& cache = trace.layers[i];
    const Shape out_sample = l.output_shape(s, i);

    switch (l.kind) {
      case LayerSpec::Kind::Dense: {
        const Tensor flat = cur->reshaped({n, shape_numel(s)});
        cache.pre = dense_forward(flat, p);
        break;
      }
      case LayerSpec::Kind::Conv2D:
        cache.pre = conv2d_forward(cur->reshaped(with_batch(n, s)), l, p, out_sample);
        break;
      case LayerSpec::Kind::ConvTranspose2D:
        cache.pre = convt2d_forward(cur->reshaped(with_batch(n, s)), l, p, out_sample);
        break;
      case LayerSpec::Kind::MaxPool2D:
        cache.pre = maxpool_forward(*cur, l.pool, out_sample, cache.argmax);
        break;
      case LayerSpec::Kind::Upsample2D: {
        const Tensor& x = *cur;
        Tensor up(with_batch(n, out_sample));
        const std::size_t f = l.factor, c = out_sample[2];
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t y = 0; y < out_sample[0]; ++y)
            for (std::size_t xx = 0; xx < out_sample[1]; ++xx)
              for (std::size_t ch = 0; ch < c; ++ch)
                up.at4(b, y, xx, ch) = x.at4(b, y / f, xx / f, ch);
        cache.pre = std::move(up);
        break;
      }
      case LayerSpec::Kind::Flatten:
      case LayerSpec::Kind::Reshape:
        cache.pre = cur->reshaped(with_batch(n, out_sample));
        break;
      case LayerSpec::Kind::Dropout: {
        if (training && l.rate > 0.0) {
          if (!rng)
            throw std::invalid_argument("forward: training pass over dropout needs an rng");
          const double keep = 1.0 - l.rate;
          cache.mask = Tensor(cur->shape);
          for (double& mv : cache.mask.data)
            mv = rng->uniform() < l.rate ? 0.0 : 1.0 / keep;
          cache.pre = *cur;
          for (std::size_t j = 0; j < cache.pre.numel(); ++j)
            cache.pre.data[j] *= cache.mask.data[j];
        } else {
          cache.pre = *cur;
        }
        break;
      }
      case LayerSpec::Kind::BatchNorm: {
        if (training) {
          BnStats st = bn_batch_stats(*cur);
          cache.pre = bn_forward(*cur, p, st.mean, st.var, cache);
          if (extra) extra->bn_stats.push_back(std::move(st));
        } else {
          cache.pre = bn_forward(*cur, p, p.running_mean, p.running_var, cache);
        }
        break;
      }
    }

    apply_activation(l.activation, cache.pre, cache.post);
    cur = &cache.post;
    s = out_sample;
  }
  return trace;
}

}  // namespace

ActivationTrace forward(const Model& model, const Tensor& input, bool training, Rng* rng) {
  return run_forward(model, input, training, rng, nullptr);
}

ActivationTrace forward_train(Model& model, const Tensor& input, Rng* rng) {
  TraceExtra extra;
  extra.training = true;
  ActivationTrace trace = run_forward(model, input, true, rng, &extra);
  std::size_t bn_idx = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (model.layers[i].kind != LayerSpec::Kind::BatchNorm) continue;
    const BnStats& st = extra.bn_stats[bn_idx++];
    LayerParams& p = model.params[i];
    for (std::size_t c = 0; c < st.mean.numel(); ++c) {
      p.running_mean.data[c] = kBnMomentum * p.running_mean.data[c] +
                               (1.0 - kBnMomentum) * st.mean.data[c];
      p.running_var.data[c] = kBnMomentum * p.running_var.data[c] +
                              (1.0 - kBnMomentum) * st.var.data[c];
    }
  }
  return trace;
}

double loss_value(const Tensor& output, const Tensor& target, Loss kind) {
  if (!output.same_shape(target))
    throw std::invalid_argument("loss: output shape " + shape_str(output.shape) +
                                " != target shape " + shape_str(target.shape));
  const std::size_t n = output.shape[0];
  double total = 0.0;
  switch (kind) {
    case Loss::MSE:
      for (std::size_t i = 0; i < output.numel(); ++i) {
        const double d = output.data[i] - target.data[i];
        total += d * d;
      }
      break;
    case Loss::CategoricalCrossEntropy: {
      const std::size_t d = output.numel() / n;
      for (std::size_t s = 0; s < n; ++s) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double t = target.data[s * d + j];
          if (t != 0.0 && t != 1.0)
            throw std::invalid_argument("cross-entropy: target is not one-hot");
          row_sum += t;
          if (t == 1.0) {
            const double o = output.data[s * d + j];
            if (o <= 0.0)
              throw std::invalid_argument("cross-entropy: output not strictly positive");
            total -= std::log(o);
          }
        }
        if (row_sum != 1.0)
          throw std::invalid_argument("cross-entropy: target is not one-hot");
      }
      break;
    }
  }
  return total / static_cast<double>(n);
}

Gradients backward(const Model& model, const ActivationTrace& trace, const Tensor& target,
                   Loss kind) {
  const std::size_t nlayers = model.layers.size();
  const std::size_t n = trace.input.shape[0];
  Gradients grads = zero_gradients(model);

  const Tensor& out = trace.output();
  if (!out.same_shape(target)) throw std::invalid_argument("backward: target shape mismatch");

  const bool softmax_final = model.layers.back().activation == Activation::Softmax;
  Tensor grad;
  bool skip_final_activation = false;
  if (kind == Loss::CategoricalCrossEntropy) {
    if (!softmax_final)
      throw std::invalid_argument("cross-entropy backward requires a final softmax layer");
    // fused softmax + cross-entropy
    grad = out;
    grad -= target;
    grad *= 1.0 / static_cast<double>(n);
    skip_final_activation = true;
  } else {
    if (softmax_final)
      throw std::invalid_argument("softmax backward is only supported with cross-entropy");
    grad = out;
    grad -= target;
    grad *= 2.0 / static_cast<double>(n);
  }

  Shape s_out = model.output_shape();
  for (std::size_t ii = nlayers; ii-- > 0;) {
    const LayerSpec& l = model.layers[ii];
    const LayerParams& p = model.params[ii];
    const LayerCache& cache = trace.layers[ii];
    const Tensor& layer_in = ii == 0 ? trace.input : trace.layers[ii - 1].post;
    const Shape s_in = model.shape_before(ii);

    if (!(skip_final_activation && ii + 1 == nlayers))
      activation_backward(l.activation, cache, grad);

    Tensor din;
    switch (l.kind) {
      case LayerSpec::Kind::Dense: {
        const Tensor flat = layer_in.reshaped({n, shape_numel(s_in)});
        dense_backward(flat, p, grad, din, grads.layers[ii]);
        din = din.reshaped(layer_in.shape);
        break;
      }
      case LayerSpec::Kind::Conv2D:
        conv2d_backward(layer_in.reshaped(with_batch(n, s_in)), l, p, grad, din,
                        grads.layers[ii]);
        din = din.reshaped(layer_in.shape);
        break;
      case LayerSpec::Kind::ConvTranspose2D:
        convt2d_backward(layer_in.reshaped(with_batch(n, s_in)), l, p, grad, din,
                         grads.layers[ii]);
        din = din.reshaped(layer_in.shape);
        break;
      case LayerSpec::Kind::MaxPool2D: {
        din = Tensor(layer_in.shape);
        for (std::size_t j = 0; j < grad.numel(); ++j) din.data[cache.argmax[j]] += grad.data[j];
        break;
      }
      case LayerSpec::Kind::Upsample2D: {
        din = Tensor(layer_in.shape);
        const std::size_t f = l.factor;
        const Shape out_s = l.output_shape(s_in, ii);
        const Tensor g4 = grad.reshaped(with_batch(n, out_s));
        Tensor d4 = din.reshaped(with_batch(n, s_in));
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t y = 0; y < out_s[0]; ++y)
            for (std::size_t x = 0; x < out_s[1]; ++x)
              for (std::size_t ch = 0; ch < out_s[2]; ++ch)
                d4.at4(b, y / f, x / f, ch) += g4.at4(b, y, x, ch);
        din = d4.reshaped(layer_in.shape);
        break;
      }
      case LayerSpec::Kind::Flatten:
      case LayerSpec::Kind::Reshape:
        din = grad.reshaped(layer_in.shape);
        break;
      case LayerSpec::Kind::Dropout: {
        din = grad;
        if (!cache.mask.empty())
          for (std::size_t j = 0; j < din.numel(); ++j) din.data[j] *= cache.mask.data[j];
        din = din.reshaped(layer_in.shape);
        break;
      }
      case LayerSpec::Kind::BatchNorm:
        bn_backward(p, cache, grad, trace.training, din, grads.layers[ii]);
        break;
    }
    grad = std::move(din);
    s_out = s_in;
  }
  return grads;
}

Tensor make_batch(const std::vector<Tensor>& samples) {
  if (samples.empty()) throw std::invalid_argument("make_batch: empty sample list");
  Shape s = with_batch(samples.size(), samples[0].shape);
  Tensor out(s);
  const std::size_t per = samples[0].numel();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].shape != samples[0].shape)
      throw std::invalid_argument("make_batch: inconsistent sample shapes");
    std::copy(samples[i].data.begin(), samples[i].data.end(), out.data.begin() + i * per);
  }
  return out;
}

Tensor one_hot_batch(const std::vector<int>& labels, std::size_t num_classes) {
  Tensor t({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
      throw std::invalid_argument("one_hot_batch: label out of range");
    t.data[i * num_classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return t;
}

}  // namespace fidel
