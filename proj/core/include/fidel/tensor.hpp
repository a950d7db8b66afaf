#ifndef FIDEL_TENSOR_HPP_
#define FIDEL_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace fidel {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense n-dimensional array of doubles, row-major.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}
  Tensor(Shape s, std::vector<double> d);

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, double v);
  static Tensor from(std::initializer_list<double> v);

  std::size_t numel() const { return data.size(); }
  bool empty() const { return data.empty(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // 4-d accessor (batch images, NHWC); bounds unchecked.
  double& at4(std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
    return data[((n * shape[1] + h) * shape[2] + w) * shape[3] + c];
  }
  double at4(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return data[((n * shape[1] + h) * shape[2] + w) * shape[3] + c];
  }
  const double* ptr4(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return data.data() + ((n * shape[1] + h) * shape[2] + w) * shape[3] + c;
  }

  Tensor reshaped(Shape s) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  double max_abs() const;
  double l2_norm() const;

  Tensor& operator+=(const Tensor& o);
  Tensor& operator-=(const Tensor& o);
  Tensor& operator*=(double c);
};

Tensor operator-(const Tensor& a, const Tensor& b);

}  // namespace fidel

#endif  // FIDEL_TENSOR_HPP_
