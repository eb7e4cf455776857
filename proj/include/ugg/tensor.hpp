#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "ugg/common.hpp"

namespace ugg {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles. Rank 0 (empty shape) is a scalar with
// one element.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), v_(numel(shape_), 0.0) {}
  Tensor(Shape shape, std::vector<double> data);
  static Tensor scalar(double x);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double x);

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(v_.size()); }
  int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }

  // Rank-2 accessor.
  double& at(int64_t i, int64_t j) { return v_[static_cast<size_t>(i * shape_[1] + j)]; }
  double at(int64_t i, int64_t j) const { return v_[static_cast<size_t>(i * shape_[1] + j)]; }

  double item() const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

  std::vector<double>& raw() { return v_; }
  const std::vector<double>& raw() const { return v_; }

 private:
  Shape shape_;
  std::vector<double> v_;
};

// Broadcast shape of two operands, numpy alignment rules (right-aligned,
// dims equal or 1). Throws on mismatch.
Shape broadcast_shape(const Shape& a, const Shape& b);

// Sum-reduce g over axes that were broadcast so the result has `target` shape.
Tensor reduce_to_shape(const Tensor& g, const Shape& target);

}  // namespace ugg
