#include "ugg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ugg {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    check(d >= 0, "negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), v_(std::move(data)) {
  check(numel(shape_) == static_cast<int64_t>(v_.size()),
        "tensor data length " + std::to_string(v_.size()) + " does not match shape " + shape_str(shape_));
}

Tensor Tensor::scalar(double x) {
  Tensor t{Shape{}};
  t.v_[0] = x;
  return t;
}

Tensor Tensor::full(Shape shape, double x) {
  Tensor t(std::move(shape));
  t.fill(x);
  return t;
}

double Tensor::item() const {
  check(size() == 1, "item() on tensor of shape " + shape_str(shape_));
  return v_[0];
}

bool Tensor::all_finite() const {
  for (double x : v_)
    if (!std::isfinite(x)) return false;
  return true;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (size_t i = 0; i < r; ++i) {
    int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    check(da == db || da == 1 || db == 1,
          "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  const Shape& gs = g.shape();
  size_t r = gs.size();
  // Right-align target against g's shape.
  Shape tal(r, 1);
  size_t off = r - target.size();
  for (size_t i = 0; i < target.size(); ++i) tal[off + i] = target[i];

  Tensor out(target);
  // Strides of the aligned target (0 where broadcast).
  std::vector<int64_t> tstride(r, 0);
  int64_t s = 1;
  for (size_t i = r; i-- > 0;) {
    tstride[i] = (tal[i] == 1) ? 0 : s;
    if (tal[i] != 1) s *= tal[i];
  }
  std::vector<int64_t> coord(r, 0);
  const int64_t n = g.size();
  for (int64_t flat = 0; flat < n; ++flat) {
    int64_t ti = 0;
    for (size_t i = 0; i < r; ++i) ti += (tal[i] == 1 ? 0 : coord[i]) * tstride[i];
    out[ti] += g[flat];
    for (size_t i = r; i-- > 0;) {
      if (++coord[i] < gs[i]) break;
      coord[i] = 0;
    }
  }
  return out;
}

}  // namespace ugg
