#include "fidel/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace fidel {

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw io_error(path + ": truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

std::vector<unsigned char> read_bytes(std::istream& in, std::size_t count,
                                      const std::string& path) {
  std::vector<unsigned char> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) throw io_error(path + ": truncated file");
  return buf;
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error(path + ": cannot open");
  return f;
}

char hex_digit(unsigned v) { return "0123456789abcdef"[v & 0xf]; }

std::string hex32(std::uint32_t v) {
  std::string s = "0x";
  for (int i = 28; i >= 0; i -= 4) s += hex_digit(v >> i);
  return s;
}

}  // namespace

Dataset load_mnist(const std::string& images_path, const std::string& labels_path, Split split) {
  constexpr std::uint32_t kImageMagic = 0x00000803;
  constexpr std::uint32_t kLabelMagic = 0x00000801;

  std::ifstream imgs = open_binary(images_path);
  const std::uint32_t img_magic = read_be32(imgs, images_path);
  if (img_magic != kImageMagic)
    throw io_error(images_path + ": bad magic, expected " + hex32(kImageMagic) + ", got " +
                   hex32(img_magic));
  const std::uint32_t count = read_be32(imgs, images_path);
  const std::uint32_t rows = read_be32(imgs, images_path);
  const std::uint32_t cols = read_be32(imgs, images_path);

  std::ifstream labs = open_binary(labels_path);
  const std::uint32_t lab_magic = read_be32(labs, labels_path);
  if (lab_magic != kLabelMagic)
    throw io_error(labels_path + ": bad magic, expected " + hex32(kLabelMagic) + ", got " +
                   hex32(lab_magic));
  const std::uint32_t lab_count = read_be32(labs, labels_path);
  if (lab_count != count)
    throw io_error(labels_path + ": label count " + std::to_string(lab_count) +
                   " != image count " + std::to_string(count));

  Dataset ds;
  ds.source = Source::MNIST;
  ds.split = split;
  ds.samples.reserve(count);
  const std::size_t pixels = std::size_t(rows) * cols;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto raw = read_bytes(imgs, pixels, images_path);
    const auto lab = read_bytes(labs, 1, labels_path);
    Sample s;
    s.image = Tensor({rows, cols, 1});
    for (std::size_t j = 0; j < pixels; ++j) s.image.data[j] = raw[j] / 255.0;
    s.label = lab[0];
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

namespace {

void load_cifar_batch(const std::string& path, Dataset& ds) {
  constexpr std::size_t kRecord = 3073;
  constexpr std::size_t kCount = 10000;
  std::ifstream f = open_binary(path);
  for (std::size_t i = 0; i < kCount; ++i) {
    const auto raw = read_bytes(f, kRecord, path);
    if (raw[0] > 9)
      throw io_error(path + ": record " + std::to_string(i) + " has label " +
                     std::to_string(int(raw[0])) + " > 9");
    Sample s;
    s.label = raw[0];
    s.image = Tensor({32, 32, 3});
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x)
          s.image.data[(y * 32 + x) * 3 + c] = raw[1 + c * 1024 + y * 32 + x] / 255.0;
    ds.samples.push_back(std::move(s));
  }
}

}  // namespace

Dataset load_cifar10_train(const std::string& directory) {
  Dataset ds;
  ds.source = Source::CIFAR10;
  ds.split = Split::Train;
  ds.samples.reserve(50000);
  for (int b = 1; b <= 5; ++b)
    load_cifar_batch(directory + "/data_batch_" + std::to_string(b) + ".bin", ds);
  return ds;
}

Dataset load_cifar10_test(const std::string& directory) {
  Dataset ds;
  ds.source = Source::CIFAR10;
  ds.split = Split::Test;
  ds.samples.reserve(10000);
  load_cifar_batch(directory + "/test_batch.bin", ds);
  return ds;
}

std::pair<Dataset, Dataset> split_auxiliary(const Dataset& test) {
  if (test.size() != 10000)
    throw io_error("split_auxiliary: expected a 10000-sample test set, got " +
                   std::to_string(test.size()));
  Dataset aux, priv;
  aux.source = priv.source = test.source;
  aux.split = Split::Auxiliary;
  priv.split = Split::PrivatePool;
  aux.samples.assign(test.samples.begin(), test.samples.begin() + 6000);
  priv.samples.assign(test.samples.begin() + 6000, test.samples.end());
  return {std::move(aux), std::move(priv)};
}

void emit_image(const Tensor& image, const std::string& path, bool normalize) {
  if (image.shape.size() != 3 || (image.shape[2] != 1 && image.shape[2] != 3))
    throw io_error("emit_image: unsupported shape " + shape_str(image.shape) +
                   ", need HxWx1 or HxWx3");
  const std::size_t h = image.shape[0], w = image.shape[1], c = image.shape[2];

  double lo = 0.0, scale = 255.0;
  if (normalize) {
    double mn = image.data[0], mx = image.data[0];
    for (double v : image.data) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    lo = mn;
    scale = mx > mn ? 255.0 / (mx - mn) : 0.0;
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error(path + ": cannot open for writing");
  f << (c == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(w * c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t i = 0; i < w * c; ++i) {
      double v = (image.data[y * w * c + i] - lo) * scale;
      v = std::clamp(v, 0.0, 255.0);
      row[i] = static_cast<unsigned char>(std::lround(v));
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw io_error(path + ": write failed");
}

Tensor read_pnm(const std::string& path) {
  std::ifstream f = open_binary(path);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if ((magic != "P5" && magic != "P6") || maxval != 255)
    throw io_error(path + ": not an 8-bit P5/P6 file");
  f.get();  // single whitespace after maxval
  const std::size_t c = magic == "P5" ? 1 : 3;
  const auto raw = read_bytes(f, h * w * c, path);
  Tensor t({h, w, c});
  for (std::size_t i = 0; i < raw.size(); ++i) t.data[i] = raw[i] / 255.0;
  return t;
}

Tensor tile_grid(const std::vector<Tensor>& images, std::size_t columns) {
  if (images.empty()) throw io_error("tile_grid: no images");
  const Shape& s = images[0].shape;
  const std::size_t h = s[0], w = s[1], c = s[2];
  const std::size_t cols = std::min(columns, images.size());
  const std::size_t rows = (images.size() + cols - 1) / cols;
  const std::size_t gap = 2;
  Tensor grid({rows * h + (rows - 1) * gap, cols * w + (cols - 1) * gap, c});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape != s) throw io_error("tile_grid: inconsistent image shapes");
    const std::size_t r0 = (i / cols) * (h + gap), c0 = (i % cols) * (w + gap);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w * c; ++x)
        grid.data[((r0 + y) * grid.shape[1]) * c + c0 * c + x] =
            images[i].data[y * w * c + x];
  }
  return grid;
}

}  // namespace fidel
