#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace texpup {

using Mat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using CMatMap = Eigen::Map<const Mat>;

/// Dense row-major tensor of doubles. Rank is the length of `shape`;
/// most ops treat it as a matrix of rows() x cols_rest().
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), data(count(shape), 0.0) {}
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != count(shape))
      throw std::invalid_argument("tensor: data does not match shape");
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor row(std::vector<double> d) {
    std::size_t n = d.size();
    return Tensor({1, n}, std::move(d));
  }
  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::size_t> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  /// Leading dimension; 1 for scalars.
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  /// Product of all trailing dimensions.
  std::size_t cols() const { return shape.empty() ? 1 : size() / shape[0]; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at2(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at2(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  double item() const {
    if (size() != 1) throw std::logic_error("tensor: item() on non-scalar");
    return data[0];
  }

  MatMap mat() { return MatMap(data.data(), rows(), cols()); }
  CMatMap mat() const { return CMatMap(data.data(), rows(), cols()); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  Tensor reshaped(std::vector<std::size_t> s) const {
    if (count(s) != size())
      throw std::invalid_argument("tensor: reshape count mismatch");
    return Tensor(std::move(s), data);
  }
};

inline std::string shape_str(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(t.shape[i]);
  return s + "]";
}

}  // namespace texpup
