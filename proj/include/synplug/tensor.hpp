#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "synplug/errors.hpp"

namespace synplug::ad {

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Dense row-major tensor of 64-bit floats; rank 0 (scalar), 1, or 2.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor from(std::vector<double> v);  // rank-1

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  bool is_scalar() const { return shape_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t len() const;  // rank-1 length

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  double item() const;  // scalar value
  void fill(double v);
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  std::string shape_str() const;  // e.g. "[3x4]"

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

[[noreturn]] void shape_fail(const std::string& op, const Tensor& a, const Tensor& b);
[[noreturn]] void shape_fail(const std::string& op, const Tensor& a);

}  // namespace synplug::ad
