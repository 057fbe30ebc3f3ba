#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "capvo/errors.hpp"

namespace capvo {

// Dense row-major n-d array. The single value type flowing through the
// network: images, feature maps, weights, gradients. Float for training
// throughput, double for gradient-check builds.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

  static Tensor from(std::vector<std::size_t> shape, std::vector<T> values) {
    Tensor t;
    if (checked_size(shape) != values.size())
      throw DimensionError("tensor data length does not match shape product");
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i) { return data_[i]; }
  const T& operator()(std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  T& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k,
                      std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  void require_finite(const std::string& what) const {
    if (!all_finite()) throw NumericError(what + ": non-finite values");
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(std::vector<std::size_t> new_shape) const {
    if (checked_size(new_shape) != data_.size())
      throw DimensionError("reshape changes element count");
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i)
      t[i] = static_cast<U>(data_[i]);
    return t;
  }

  static std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += "x";
      out += std::to_string(s[i]);
    }
    return out + "]";
  }

 private:
  static std::size_t checked_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) throw DimensionError("zero tensor dimension");
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

template <typename T>
void require_shape(const Tensor<T>& t, const std::vector<std::size_t>& shape,
                   const std::string& what) {
  if (t.shape() != shape)
    throw DimensionError(what + ": expected " + Tensor<T>::shape_str(shape) +
                         ", got " + Tensor<T>::shape_str(t.shape()));
}

}  // namespace capvo
