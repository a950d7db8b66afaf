#include "fidel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "fidel/data.hpp"
#include "fidel/rng.hpp"

namespace fidel {

namespace {

struct Bump {
  double cx, cy, sx, sy, amp, rot;
  double rgb[3];
};

std::vector<Bump> class_bumps(std::uint64_t seed, int cls, std::size_t dim, bool color) {
  Rng rng(mix_seed(seed, 0xA000 + cls));
  const std::size_t count = 5 + rng.below(4);
  std::vector<Bump> bumps;
  const double lo = dim * 0.2, hi = dim * 0.8;
  for (std::size_t i = 0; i < count; ++i) {
    Bump b;
    b.cx = rng.uniform(lo, hi);
    b.cy = rng.uniform(lo, hi);
    b.sx = rng.uniform(dim * 0.05, dim * 0.14);
    b.sy = rng.uniform(dim * 0.05, dim * 0.14);
    b.amp = rng.uniform(0.6, 1.0);
    b.rot = 0.0;
    for (int c = 0; c < 3; ++c) b.rgb[c] = color ? rng.uniform(0.1, 1.0) : 1.0;
    bumps.push_back(b);
  }
  return bumps;
}

// Stroke-shaped variant for the digit stand-in: each class owns several
// distinct sub-modes so a trained classifier develops mode-selective units,
// mirroring the intra-class structure of handwritten digits.
constexpr int kDigitModes = 8;

std::vector<Bump> digit_mode_bumps(std::uint64_t seed, int cls, int mode) {
  Rng rng(mix_seed(seed, 0xA000 + cls * 16 + mode));
  const std::size_t count = 5 + rng.below(3);
  std::vector<Bump> bumps;
  for (std::size_t i = 0; i < count; ++i) {
    Bump b;
    b.cx = rng.uniform(6.0, 22.0);
    b.cy = rng.uniform(6.0, 22.0);
    const double s = rng.uniform(1.2, 2.5);
    b.sx = s * 3.0;
    b.sy = s;
    b.rot = rng.uniform(0.0, 3.14159265358979323846);
    b.amp = rng.uniform(0.7, 1.0);
    b.rgb[0] = b.rgb[1] = b.rgb[2] = 1.0;
    bumps.push_back(b);
  }
  return bumps;
}

void render_digit(const std::vector<Bump>& bumps, Rng& rng, std::vector<unsigned char>& out) {
  const double dx = rng.uniform(-1.5, 1.5), dy = rng.uniform(-1.5, 1.5);
  std::vector<double> img(28 * 28, 0.0);
  for (const Bump& b : bumps) {
    const double amp = b.amp * rng.uniform(0.85, 1.05);
    const double cr = std::cos(b.rot), sr = std::sin(b.rot);
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 28; ++x) {
        const double ux = x - (b.cx + dx), uy = y - (b.cy + dy);
        const double gx = (cr * ux + sr * uy) / b.sx, gy = (-sr * ux + cr * uy) / b.sy;
        img[y * 28 + x] += amp * std::exp(-0.5 * (gx * gx + gy * gy));
      }
  }
  for (std::size_t i = 0; i < img.size(); ++i) {
    double v = std::max(0.0, img[i] - 0.30) / 0.70;  // sparse black canvas
    v = std::clamp(v + rng.uniform(-0.015, 0.015), 0.0, 1.0);
    out[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
}

// Renders one sample of a class: archetype bumps shifted and jittered.
void render(const std::vector<Bump>& bumps, Rng& rng, std::size_t dim, std::size_t channels,
            bool dark_background, std::vector<unsigned char>& out_hwc) {
  const double dx = rng.uniform(-3.0, 3.0);
  const double dy = rng.uniform(-3.0, 3.0);
  const double gain = rng.uniform(0.75, 1.0);
  std::vector<double> per_bump(bumps.size());
  for (double& a : per_bump) a = rng.uniform(0.7, 1.1);

  std::vector<double> img(dim * dim * channels, 0.0);
  if (!dark_background) {
    // smooth color gradient floor so the canvas is not black
    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
      c0[c] = rng.uniform(0.1, 0.5);
      c1[c] = rng.uniform(0.1, 0.5);
    }
    for (std::size_t y = 0; y < dim; ++y)
      for (std::size_t x = 0; x < dim; ++x) {
        const double t = (double(x) + double(y)) / (2.0 * (dim - 1));
        for (std::size_t c = 0; c < channels; ++c)
          img[(y * dim + x) * channels + c] = c0[c] * (1 - t) + c1[c] * t;
      }
  }

  for (std::size_t i = 0; i < bumps.size(); ++i) {
    const Bump& b = bumps[i];
    const double cx = b.cx + dx, cy = b.cy + dy;
    for (std::size_t y = 0; y < dim; ++y) {
      const double gy = (double(y) - cy) / b.sy;
      for (std::size_t x = 0; x < dim; ++x) {
        const double gx = (double(x) - cx) / b.sx;
        const double v = b.amp * per_bump[i] * std::exp(-0.5 * (gx * gx + gy * gy));
        for (std::size_t c = 0; c < channels; ++c)
          img[(y * dim + x) * channels + c] += v * b.rgb[c];
      }
    }
  }

  for (std::size_t i = 0; i < img.size(); ++i) {
    double v = img[i] * gain;
    if (dark_background) v = std::max(0.0, v - 0.12) / 0.88;  // black canvas, digit-style
    v += rng.uniform(-0.02, 0.02);
    v = std::clamp(v, 0.0, 1.0);
    out_hwc[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_idx_pair(const std::string& images_path, const std::string& labels_path,
                    std::size_t count, std::uint64_t seed, std::uint64_t stream) {
  std::ofstream imgs(images_path, std::ios::binary);
  std::ofstream labs(labels_path, std::ios::binary);
  if (!imgs || !labs) throw io_error("synthetic mnist: cannot open output files");
  write_be32(imgs, 0x00000803);
  write_be32(imgs, static_cast<std::uint32_t>(count));
  write_be32(imgs, 28);
  write_be32(imgs, 28);
  write_be32(labs, 0x00000801);
  write_be32(labs, static_cast<std::uint32_t>(count));

  std::vector<std::vector<std::vector<Bump>>> archetypes(10);
  for (int c = 0; c < 10; ++c)
    for (int m = 0; m < kDigitModes; ++m) archetypes[c].push_back(digit_mode_bumps(seed, c, m));

  Rng rng(mix_seed(seed, stream));
  std::vector<unsigned char> px(28 * 28);
  for (std::size_t i = 0; i < count; ++i) {
    const int cls = static_cast<int>(rng.below(10));
    const int mode = static_cast<int>(rng.below(kDigitModes));
    render_digit(archetypes[cls][mode], rng, px);
    imgs.write(reinterpret_cast<const char*>(px.data()), px.size());
    labs.put(static_cast<char>(cls));
  }
}

}  // namespace

void write_synthetic_mnist(const std::string& dir, const SynthSpec& spec) {
  write_idx_pair(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte",
                 spec.train_count, spec.seed, 0xB001);
  write_idx_pair(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte",
                 spec.test_count, spec.seed, 0xB002);
}

void write_synthetic_cifar10(const std::string& dir, std::uint64_t seed) {
  std::vector<std::vector<Bump>> archetypes;
  for (int c = 0; c < 10; ++c) archetypes.push_back(class_bumps(seed, 100 + c, 32, true));

  const auto write_batch = [&](const std::string& path, std::uint64_t stream) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error(path + ": cannot open for writing");
    Rng rng(mix_seed(seed, stream));
    std::vector<unsigned char> hwc(32 * 32 * 3);
    std::vector<unsigned char> planar(3072);
    for (std::size_t i = 0; i < 10000; ++i) {
      const int cls = static_cast<int>(rng.below(10));
      render(archetypes[cls], rng, 32, 3, false, hwc);
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 32; ++y)
          for (std::size_t x = 0; x < 32; ++x)
            planar[c * 1024 + y * 32 + x] = hwc[(y * 32 + x) * 3 + c];
      f.put(static_cast<char>(cls));
      f.write(reinterpret_cast<const char*>(planar.data()), planar.size());
    }
  };

  for (int b = 1; b <= 5; ++b)
    write_batch(dir + "/data_batch_" + std::to_string(b) + ".bin", 0xC000 + b);
  write_batch(dir + "/test_batch.bin", 0xC006);
}

}  // namespace fidel
