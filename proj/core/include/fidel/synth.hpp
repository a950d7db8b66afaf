#ifndef FIDEL_SYNTH_HPP_
#define FIDEL_SYNTH_HPP_

#include <cstdint>
#include <string>

namespace fidel {

// Procedurally generated stand-in datasets written in the canonical binary
// distributions (IDX pair / 3073-byte record batches), for environments
// where the original files are unavailable. Ten smooth per-class archetypes
// with per-sample shift, amplitude jitter and noise; class-separable enough
// to pretrain the victim classifiers.
struct SynthSpec {
  std::size_t train_count = 60000;
  std::size_t test_count = 10000;
  std::uint64_t seed = 7;
};

// Writes train-images-idx3-ubyte, train-labels-idx1-ubyte,
// t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte into dir.
void write_synthetic_mnist(const std::string& dir, const SynthSpec& spec = {});

// Writes data_batch_1..5.bin and test_batch.bin (always the canonical
// 10000-record batches; counts in the spec are ignored).
void write_synthetic_cifar10(const std::string& dir, std::uint64_t seed = 7);

}  // namespace fidel

#endif  // FIDEL_SYNTH_HPP_
