#pragma once

// Dense row-major double tensor with an optional gradient buffer of the
// same shape. All numeric kernels in the library operate on this type.

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sedkit/errors.hpp"

namespace sedkit {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel_of(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw ShapeError("negative extent");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

struct Tensor {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty, or same length as data

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), data(static_cast<std::size_t>(numel_of(shape)), fill) {}

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  std::size_t ndim() const { return shape.size(); }
  std::int64_t dim(std::size_t i) const { return shape.at(i); }

  double& operator()(std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  double operator()(std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
  double& operator()(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
  double operator()(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
  double& operator()(std::int64_t i, std::int64_t j, std::int64_t k) {
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  double operator()(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  double& operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
    return data[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }
  double operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
    return data[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }

  void require_shape(const Shape& s, const char* what) const {
    if (shape != s) throw ShapeError(std::string(what) + ": expected " + shape_str(s) + ", got " + shape_str(shape));
  }

  bool has_grad() const { return !grad.empty(); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }

  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace sedkit
