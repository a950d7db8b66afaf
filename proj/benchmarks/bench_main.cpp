#include <benchmark/benchmark.h>

#include "fidel/archs.hpp"
#include "fidel/attack.hpp"
#include "fidel/fed.hpp"
#include "fidel/genrec.hpp"
#include "fidel/rng.hpp"

using namespace fidel;

namespace {

Tensor random_batch(const Shape& sample, std::size_t n, std::uint64_t seed) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  Tensor t(s);
  Rng rng(seed);
  for (double& v : t.data) v = rng.uniform();
  return t;
}

std::vector<Sample> random_samples(const Shape& shape, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> out(n);
  for (Sample& s : out) {
    s.image = Tensor(shape);
    for (double& v : s.image.data) v = rng.uniform();
    s.label = static_cast<int>(rng.below(10));
  }
  return out;
}

void BM_FcnnForward(benchmark::State& state) {
  const Model m = make_fcnn({28, 28, 1});
  const Tensor x = random_batch({28, 28, 1}, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, x).output().data[0]);
}
BENCHMARK(BM_FcnnForward)->Arg(1)->Arg(50);

void BM_FcnnBackward(benchmark::State& state) {
  const Model m = make_fcnn({28, 28, 1});
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_batch({28, 28, 1}, n, 2);
  std::vector<int> labels(n, 3);
  const Tensor y = one_hot_batch(labels, 10);
  ActivationTrace t = forward(m, x);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        backward(m, t, y, Loss::CategoricalCrossEntropy).layers[0].w.data[0]);
}
BENCHMARK(BM_FcnnBackward)->Arg(1)->Arg(50);

void BM_CnnForward(benchmark::State& state) {
  const Model m = make_cnn({28, 28, 1});
  const Tensor x = random_batch({28, 28, 1}, static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, x).output().data[0]);
}
BENCHMARK(BM_CnnForward)->Arg(1)->Arg(16);

void BM_ClientRound(benchmark::State& state) {
  const Model m = make_fcnn({28, 28, 1}, Activation::ReLU, 0.5, 4);
  const auto local = random_samples({28, 28, 1}, static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state)
    benchmark::DoNotOptimize(client_train(m, local, ClientConfig{}).update.l2_norm());
}
BENCHMARK(BM_ClientRound)->Arg(1)->Arg(30);

void BM_ExtractPartials(benchmark::State& state) {
  const Model m = make_fcnn({28, 28, 1});
  const auto local = random_samples({28, 28, 1}, 30, 6);
  const ClientResult res = client_train(m, local, ClientConfig{});
  for (auto _ : state)
    benchmark::DoNotOptimize(extract_partials(res.update, m).front().values.data[0]);
}
BENCHMARK(BM_ExtractPartials);

void BM_GrayGeneratorForward(benchmark::State& state) {
  const TrainedGenerator gen{make_gray_generator(7), {}, {}};
  const Tensor f = random_batch({13, 13, 32}, 1, 8).reshaped({13, 13, 32});
  for (auto _ : state) benchmark::DoNotOptimize(generate(gen, f).data[0]);
}
BENCHMARK(BM_GrayGeneratorForward);

}  // namespace

BENCHMARK_MAIN();
