#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>

#include "fidel/data.hpp"
#include "fidel/synth.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace fidel;
using fidel::testutil::TempDir;

namespace {

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x >> 24));
  v.push_back(static_cast<unsigned char>(x >> 16));
  v.push_back(static_cast<unsigned char>(x >> 8));
  v.push_back(static_cast<unsigned char>(x));
}

}  // namespace

TEST_CASE("mnist loader: counts, shapes, range") {
  const Dataset& train = fidel::testutil::mnist_train();
  const Dataset& test = fidel::testutil::mnist_test();
  CHECK(train.size() == 12000);
  CHECK(test.size() == 10000);
  for (const Sample& s : {train.samples[0], test.samples[9999]}) {
    CHECK(s.image.shape == Shape{28, 28, 1});
    CHECK(s.label >= 0);
    CHECK(s.label <= 9);
    for (double v : s.image.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      // normalization is the only transformation applied
      CHECK(std::fabs(v * 255.0 - std::round(v * 255.0)) < 1e-9);
    }
  }
}

TEST_CASE("mnist loader: deterministic across reloads") {
  const std::string& d = fidel::testutil::mnist_dir();
  const Dataset a = load_mnist(d + "/t10k-images-idx3-ubyte", d + "/t10k-labels-idx1-ubyte");
  const Dataset b = load_mnist(d + "/t10k-images-idx3-ubyte", d + "/t10k-labels-idx1-ubyte");
  CHECK(a.samples[123].image.data == b.samples[123].image.data);
  CHECK(a.samples[123].label == b.samples[123].label);
}

TEST_CASE("mnist loader: error cases") {
  TempDir dir("mnist_errors");

  SUBCASE("bad magic names expected and actual") {
    std::vector<unsigned char> bytes;
    push_be32(bytes, 0xDEADBEEF);
    push_be32(bytes, 0);
    push_be32(bytes, 28);
    push_be32(bytes, 28);
    write_bytes(dir.file("images"), bytes);
    std::vector<unsigned char> labels;
    push_be32(labels, 0x00000801);
    push_be32(labels, 0);
    write_bytes(dir.file("labels"), labels);
    CHECK_THROWS_AS(load_mnist(dir.file("images"), dir.file("labels")), io_error);
    try {
      load_mnist(dir.file("images"), dir.file("labels"));
    } catch (const io_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("803") != std::string::npos);
      CHECK(msg.find("deadbeef") != std::string::npos);
    }
  }

  SUBCASE("truncated image payload") {
    std::vector<unsigned char> bytes;
    push_be32(bytes, 0x00000803);
    push_be32(bytes, 2);
    push_be32(bytes, 28);
    push_be32(bytes, 28);
    bytes.resize(bytes.size() + 100);  // far short of 2*784
    write_bytes(dir.file("images"), bytes);
    std::vector<unsigned char> labels;
    push_be32(labels, 0x00000801);
    push_be32(labels, 2);
    labels.push_back(0);
    labels.push_back(1);
    write_bytes(dir.file("labels"), labels);
    CHECK_THROWS_AS(load_mnist(dir.file("images"), dir.file("labels")), io_error);
  }

  SUBCASE("image/label count mismatch") {
    SynthSpec spec;
    spec.train_count = 4;
    spec.test_count = 6;
    write_synthetic_mnist(dir.str(), spec);
    CHECK_THROWS_AS(
        load_mnist(dir.file("train-images-idx3-ubyte"), dir.file("t10k-labels-idx1-ubyte")),
        io_error);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_mnist(dir.file("absent"), dir.file("alsoabsent")), io_error);
  }
}

TEST_CASE("cifar10 loader: counts, shapes, range") {
  const Dataset& train = fidel::testutil::cifar_train();
  const Dataset& test = fidel::testutil::cifar_test();
  CHECK(train.size() == 50000);
  CHECK(test.size() == 10000);
  CHECK(train.samples[0].image.shape == Shape{32, 32, 3});
  for (const Sample& s : {train.samples[49999], test.samples[0]}) {
    CHECK(s.label >= 0);
    CHECK(s.label <= 9);
    for (double v : s.image.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("cifar10 loader: error cases") {
  TempDir dir("cifar_errors");

  SUBCASE("record with label > 9") {
    std::vector<unsigned char> bytes(10000 * 3073, 0);
    bytes[0] = 11;
    write_bytes(dir.file("test_batch.bin"), bytes);
    CHECK_THROWS_AS(load_cifar10_test(dir.str()), io_error);
  }

  SUBCASE("truncated batch") {
    std::vector<unsigned char> bytes(3073 * 5, 0);
    write_bytes(dir.file("test_batch.bin"), bytes);
    CHECK_THROWS_AS(load_cifar10_test(dir.str()), io_error);
  }
}

TEST_CASE("split_auxiliary partitions the test set in order") {
  const Dataset& test = fidel::testutil::mnist_test();
  const auto [aux, pool] = split_auxiliary(test);
  CHECK(aux.size() == 6000);
  CHECK(pool.size() == 4000);
  CHECK(aux.samples[0].image.data == test.samples[0].image.data);
  CHECK(aux.samples[5999].image.data == test.samples[5999].image.data);
  CHECK(pool.samples[0].image.data == test.samples[6000].image.data);
  CHECK(pool.samples[3999].image.data == test.samples[9999].image.data);

  Dataset small = test;
  small.samples.resize(400);
  CHECK_THROWS_AS(split_auxiliary(small), io_error);
}

TEST_CASE("emit_image writes pnm files") {
  TempDir dir("pnm");

  SUBCASE("constant zero tensor becomes an all-black P5 file") {
    emit_image(Tensor({28, 28, 1}), dir.file("black.pgm"));
    std::ifstream f(dir.file("black.pgm"), std::ios::binary);
    std::string magic;
    f >> magic;
    CHECK(magic == "P5");
    const Tensor back = read_pnm(dir.file("black.pgm"));
    CHECK(back.shape == Shape{28, 28, 1});
    for (double v : back.data) CHECK(v == 0.0);
  }

  SUBCASE("normalize maps min to 0 and max to 255") {
    Tensor t({2, 2, 1}, {-3.0, 0.0, 1.0, 5.0});
    emit_image(t, dir.file("norm.pgm"), true);
    const Tensor back = read_pnm(dir.file("norm.pgm"));
    CHECK(back.data[0] == 0.0);
    CHECK(back.data[3] == 1.0);
  }

  SUBCASE("round trip preserves pixels within quantization") {
    Rng rng(77);
    Tensor t = fidel::testutil::random_tensor({9, 7, 3}, rng, 0.0, 1.0);
    emit_image(t, dir.file("rt.ppm"));
    std::ifstream f(dir.file("rt.ppm"), std::ios::binary);
    std::string magic;
    f >> magic;
    CHECK(magic == "P6");
    const Tensor back = read_pnm(dir.file("rt.ppm"));
    REQUIRE(back.shape == t.shape);
    for (std::size_t i = 0; i < t.numel(); ++i)
      CHECK(std::fabs(back.data[i] - t.data[i]) <= 1.0 / 255.0);
  }

  SUBCASE("unsupported shape is rejected") {
    CHECK_THROWS_AS(emit_image(Tensor({4, 4, 2}), dir.file("bad.pgm")), io_error);
  }
}

TEST_CASE("tile_grid composes same-shape tiles") {
  std::vector<Tensor> tiles(5, Tensor::full({4, 4, 1}, 0.5));
  const Tensor grid = tile_grid(tiles, 3);
  // 2 rows x 3 columns of 4px tiles with 2px gaps
  CHECK(grid.shape[0] == 2 * 4 + 1 * 2);
  CHECK(grid.shape[1] == 3 * 4 + 2 * 2);
  CHECK(grid.shape[2] == 1);
}
