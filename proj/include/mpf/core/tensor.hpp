#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mpf/core/error.hpp"

namespace mpf {

/// Dense row-major tensor with named axes. Float32 is the on-disk dtype;
/// double instantiations exist for the finite-difference gradient checks.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<uint32_t> dims, std::vector<std::string> axes = {})
      : dims_(std::move(dims)), axes_(std::move(axes)) {
    check(axes_.empty() || axes_.size() == dims_.size(),
          "tensor: axis name count does not match rank");
    data_.assign(element_count(dims_), T(0));
  }

  static Tensor of(std::vector<uint32_t> dims, std::vector<T> payload,
                   std::vector<std::string> axes = {}) {
    Tensor t;
    t.dims_ = std::move(dims);
    t.axes_ = std::move(axes);
    t.data_ = std::move(payload);
    check(t.axes_.empty() || t.axes_.size() == t.dims_.size(),
          "tensor: axis name count does not match rank");
    check(t.data_.size() == element_count(t.dims_),
          "tensor: payload length does not match dims product");
    return t;
  }

  static size_t element_count(const std::vector<uint32_t>& dims) {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return n;
  }

  size_t size() const { return data_.size(); }
  size_t rank() const { return dims_.size(); }
  uint32_t dim(size_t i) const { return dims_[i]; }
  const std::vector<uint32_t>& dims() const { return dims_; }
  const std::vector<std::string>& axes() const { return axes_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(dims_, axes_);
    for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  std::vector<uint32_t> dims_;
  std::vector<std::string> axes_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

inline size_t idx4(size_t c, size_t t, size_t h, size_t w, size_t T_, size_t H, size_t W) {
  return ((c * T_ + t) * H + h) * W + w;
}

inline size_t idx3(size_t c, size_t h, size_t w, size_t H, size_t W) {
  return (c * H + h) * W + w;
}

}  // namespace mpf
