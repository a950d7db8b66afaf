#ifndef FIDEL_TESTS_TEST_UTIL_HPP_
#define FIDEL_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "fidel/model.hpp"
#include "fidel/rng.hpp"

namespace fidel::testutil {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Independent gradient oracle: central finite differences of the batch loss
// over every trainable parameter. Deliberately routed through loss_value +
// forward only, never through backward().
inline Gradients fd_gradients(Model& model, const Tensor& input, const Tensor& target, Loss kind,
                              bool training = false, double step = 1e-5) {
  Gradients out = zero_gradients(model);
  const auto eval = [&] {
    return loss_value(forward(model, input, training, nullptr).output(), target, kind);
  };
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    if (!model.layers[li].has_weights()) continue;
    for (Tensor LayerParams::* member : {&LayerParams::w, &LayerParams::b}) {
      Tensor& param = model.params[li].*member;
      Tensor& grad = out.layers[li].*member;
      for (std::size_t j = 0; j < param.numel(); ++j) {
        const double orig = param.data[j];
        param.data[j] = orig + step;
        const double up = eval();
        param.data[j] = orig - step;
        const double down = eval();
        param.data[j] = orig;
        grad.data[j] = (up - down) / (2.0 * step);
      }
    }
  }
  return out;
}

inline double grad_rel_err(const Gradients& a, const Gradients& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    for (Tensor LayerParams::* member : {&LayerParams::w, &LayerParams::b}) {
      const Tensor& ta = a.layers[i].*member;
      const Tensor& tb = b.layers[i].*member;
      for (std::size_t j = 0; j < ta.numel(); ++j) {
        // the floor sets an absolute scale for near-zero gradients, where the
        // central-difference oracle itself carries ~1e-10 roundoff noise
        const double denom = std::max(std::fabs(ta.data[j]) + std::fabs(tb.data[j]), 1e-4);
        worst = std::max(worst, std::fabs(ta.data[j] - tb.data[j]) / denom);
      }
    }
  }
  return worst;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("fidel_test_" + tag);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace fidel::testutil

#endif  // FIDEL_TESTS_TEST_UTIL_HPP_
