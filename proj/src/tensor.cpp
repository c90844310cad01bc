#include "synplug/tensor.hpp"

#include <cmath>
#include <numeric>

namespace synplug::ad {

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str());
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_ = {v};
  return t;
}

Tensor Tensor::from(std::vector<double> v) {
  Tensor t;
  t.shape_ = {v.size()};
  t.data_ = std::move(v);
  return t;
}

std::size_t Tensor::rows() const {
  if (ndim() != 2) throw ShapeError("rows() on non-matrix " + shape_str());
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (ndim() != 2) throw ShapeError("cols() on non-matrix " + shape_str());
  return shape_[1];
}

std::size_t Tensor::len() const {
  if (ndim() != 1) throw ShapeError("len() on non-vector " + shape_str());
  return shape_[0];
}

double Tensor::item() const {
  if (!is_scalar()) throw ShapeError("item() on non-scalar " + shape_str());
  return data_[0];
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  if (shape_.empty()) return "[scalar]";
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

void shape_fail(const std::string& op, const Tensor& a, const Tensor& b) {
  throw ShapeError(op + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

void shape_fail(const std::string& op, const Tensor& a) {
  throw ShapeError(op + ": bad shape " + a.shape_str());
}

}  // namespace synplug::ad
