#include "dlf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dlf {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("shape has non-positive dimension: " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  v_.assign(size_t(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  v_.assign(size_t(shape_numel(shape_)), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), v_(std::move(values)) {
  if (int64_t(v_.size()) != shape_numel(shape_)) {
    throw ShapeError("value count " + std::to_string(v_.size()) +
                     " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::row(std::vector<double> v) {
  const int n = int(v.size());
  return Tensor({1, n}, std::move(v));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

int Tensor::rows() const {
  if (shape_.size() > 2) throw ShapeError("rows(): rank > 2 tensor " + shape_str(shape_));
  if (shape_.size() == 2) return shape_[0];
  return 1;
}

int Tensor::cols() const {
  if (shape_.size() > 2) throw ShapeError("cols(): rank > 2 tensor " + shape_str(shape_));
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  if (v_.size() != 1) {
    throw ShapeError("item(): tensor " + shape_str(shape_) + " is not a scalar");
  }
  return v_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

void Tensor::round_to_precision() {
  if (precision() == Precision::Bits64) return;
  for (double& x : v_) x = double(float(x));
}

void Tensor::fill(double v) { std::fill(v_.begin(), v_.end(), v); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: shapes differ " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  double worst = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace dlf
