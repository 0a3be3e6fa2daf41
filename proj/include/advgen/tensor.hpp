#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace advgen {

/// Dense row-major tensor of doubles. Rank 1 is a vector, rank 2 a matrix;
/// scalars are represented as shape {1}.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)), data(count(shape), fill) {}

  Tensor(std::vector<std::size_t> s, std::vector<double> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != count(shape))
      throw std::invalid_argument("tensor: value count does not match shape");
  }

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  static Tensor vector(std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }

  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v) {
    return Tensor({r, c}, std::move(v));
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  // Rank-2 accessors; rank-1 tensors are treated as a single row.
  std::size_t rows() const { return rank() >= 2 ? shape[0] : 1; }
  std::size_t cols() const {
    if (rank() >= 2) return shape[1];
    return shape.empty() ? 1 : shape[0];
  }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  double item() const {
    if (size() != 1) throw std::invalid_argument("tensor: item() on non-scalar");
    return data[0];
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 1 : n;
  }
};

inline std::string shape_string(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape[i]);
  }
  return s + "]";
}

}  // namespace advgen
