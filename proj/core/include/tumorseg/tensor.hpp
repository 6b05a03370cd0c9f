#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tumorseg {

// Dense row-major tensor of doubles. Image-like data is laid out HWC and
// batches NHWC throughout the library.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double value);

  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double& operator()(int i, int j) { return data_[idx2(i, j)]; }
  double operator()(int i, int j) const { return data_[idx2(i, j)]; }
  double& operator()(int i, int j, int k) { return data_[idx3(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[idx3(i, j, k)]; }
  double& operator()(int i, int j, int k, int l) { return data_[idx4(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return data_[idx4(i, j, k, l)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void fill(double value);
  std::string shape_str() const;

 private:
  std::size_t idx2(int i, int j) const {
    return static_cast<std::size_t>(i) * shape_[1] + j;
  }
  std::size_t idx3(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k;
  }
  std::size_t idx4(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace tumorseg
