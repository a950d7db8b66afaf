#ifndef FIDEL_TESTS_FIXTURES_HPP_
#define FIDEL_TESTS_FIXTURES_HPP_

#include <filesystem>
#include <string>

#include "fidel/archs.hpp"
#include "fidel/data.hpp"
#include "fidel/fed.hpp"
#include "fidel/synth.hpp"

namespace fidel::testutil {

// Synthetic stand-in datasets, generated once into a cache directory and
// shared by all test cases (deterministic, so reuse across runs is safe).
inline const std::string& fixture_dir() {
  static const std::string dir = [] {
    const auto p = std::filesystem::temp_directory_path() / "fidel_fixtures";
    std::filesystem::create_directories(p);
    return p.string();
  }();
  return dir;
}

inline const std::string& mnist_dir() {
  static const std::string dir = [] {
    const std::string d = fixture_dir() + "/mnist";
    std::filesystem::create_directories(d);
    if (!std::filesystem::exists(d + "/t10k-labels-idx1-ubyte")) {
      SynthSpec spec;
      spec.train_count = 12000;  // enough to pretrain the victims quickly
      spec.test_count = 10000;
      write_synthetic_mnist(d, spec);
    }
    return d;
  }();
  return dir;
}

inline const std::string& cifar_dir() {
  static const std::string dir = [] {
    const std::string d = fixture_dir() + "/cifar10";
    std::filesystem::create_directories(d);
    if (!std::filesystem::exists(d + "/test_batch.bin")) write_synthetic_cifar10(d);
    return d;
  }();
  return dir;
}

inline const Dataset& mnist_train() {
  static const Dataset ds = load_mnist(mnist_dir() + "/train-images-idx3-ubyte",
                                       mnist_dir() + "/train-labels-idx1-ubyte", Split::Train);
  return ds;
}

inline const Dataset& mnist_test() {
  static const Dataset ds = load_mnist(mnist_dir() + "/t10k-images-idx3-ubyte",
                                       mnist_dir() + "/t10k-labels-idx1-ubyte", Split::Test);
  return ds;
}

inline const Dataset& cifar_train() {
  static const Dataset ds = load_cifar10_train(cifar_dir());
  return ds;
}

inline const Dataset& cifar_test() {
  static const Dataset ds = load_cifar10_test(cifar_dir());
  return ds;
}

// One pretrained Table-style FCNN victim (ReLU + dropout 0.5), shared.
inline const Model& pretrained_fcnn() {
  static const Model m = pretrain(make_fcnn({28, 28, 1}, Activation::ReLU, 0.5, 1), mnist_train(),
                                  5, 50, 0.01, 1);
  return m;
}

}  // namespace fidel::testutil

#endif  // FIDEL_TESTS_FIXTURES_HPP_
