#ifndef FIDEL_DATA_HPP_
#define FIDEL_DATA_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fidel/tensor.hpp"

namespace fidel {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Source : std::uint8_t { MNIST = 0, CIFAR10 };
enum class Split : std::uint8_t { Train = 0, Test, Auxiliary, PrivatePool };

struct Sample {
  Tensor image;  // H x W x C, values in [0,1]
  int label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  Source source = Source::MNIST;
  Split split = Split::Train;

  std::size_t size() const { return samples.size(); }
};

// IDX pair (big-endian; image magic 0x00000803, label magic 0x00000801).
// Pixels are scaled by 1/255.
Dataset load_mnist(const std::string& images_path, const std::string& labels_path,
                   Split split = Split::Train);

// Canonical binary batches: data_batch_1..5.bin + test_batch.bin, 10000
// records of 1 label byte + 3072 channel-planar pixel bytes each. Planar RGB
// is transposed to H x W x C.
Dataset load_cifar10_train(const std::string& directory);
Dataset load_cifar10_test(const std::string& directory);

// First 6000 test samples become the auxiliary set, the remaining 4000 the
// private pool; requires exactly 10000 samples in file order.
std::pair<Dataset, Dataset> split_auxiliary(const Dataset& test);

// Writes binary PGM (P5) for HxWx1 or PPM (P6) for HxWx3, maxval 255. With
// normalize set, [min,max] is affinely mapped onto [0,255]; otherwise values
// are clamped to [0,1] and quantized.
void emit_image(const Tensor& image, const std::string& path, bool normalize = false);

// Reads back a P5/P6 file into an HxWxC tensor in [0,1].
Tensor read_pnm(const std::string& path);

// Tiles per-sample images (all same shape) into one grid image.
Tensor tile_grid(const std::vector<Tensor>& images, std::size_t columns);

}  // namespace fidel

#endif  // FIDEL_DATA_HPP_
