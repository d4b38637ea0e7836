#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlf/common.hpp"

namespace dlf {

// Dims of a dense tensor. Rank 0 ({}) is a scalar; most of the model lives in
// rank 2 (rows x cols).
using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense real tensor. Storage is double; see Precision in common.hpp for how
// 32-bit mode is emulated.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, double fill);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }
  static Tensor row(std::vector<double> v);
  static Tensor matrix(int rows, int cols, std::vector<double> v);

  const Shape& shape() const { return shape_; }
  int64_t size() const { return int64_t(v_.size()); }
  bool empty() const { return v_.empty(); }

  // Rank <= 2 views; a rank-1 tensor counts as a single row.
  int rows() const;
  int cols() const;

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  double& at(int r, int c) { return v_[size_t(r) * size_t(cols()) + size_t(c)]; }
  double at(int r, int c) const { return v_[size_t(r) * size_t(cols()) + size_t(c)]; }
  double& operator[](int64_t i) { return v_[size_t(i)]; }
  double operator[](int64_t i) const { return v_[size_t(i)]; }

  // Value of a single-element tensor; throws ShapeError otherwise.
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  // In Bits32 mode, snaps every value to the nearest float. No-op in Bits64.
  void round_to_precision();

  void fill(double v);

 private:
  Shape shape_;
  std::vector<double> v_;
};

// Largest elementwise |a-b|; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace dlf
