#include "dcnn/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace dcnn {

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("invalid shape: no extents");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("invalid shape " + shape_to_string(shape));
  }
}

template <typename Real>
BasicTensor<Real> gaussian_fill(const Shape& shape, SeededRng& rng) {
  BasicTensor<Real> t(shape);
  for (auto& v : t.data()) v = static_cast<Real>(rng.normal());
  return t;
}

template <typename Real>
Real flat_inner(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("flat_inner: shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
  Real acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename Real>
Real l2_norm(const BasicTensor<Real>& a) {
  return std::sqrt(flat_inner(a, a));
}

template <typename Real>
BasicTensor<Real> translate(const BasicTensor<Real>& w, long dx, long dy) {
  if (w.ndim() < 2) {
    throw ShapeError("translate: need at least 2 dims, got " +
                     shape_to_string(w.shape()));
  }
  const long h = static_cast<long>(w.dim(w.ndim() - 2));
  const long wd = static_cast<long>(w.dim(w.ndim() - 1));
  const std::size_t planes = w.size() / static_cast<std::size_t>(h * wd);
  BasicTensor<Real> out(w.shape());

  const long y0 = std::max(0L, dy), y1 = std::min(h, h + dy);
  const long x0 = std::max(0L, dx), x1 = std::min(wd, wd + dx);
  for (std::size_t p = 0; p < planes; ++p) {
    const Real* src = w.raw() + p * h * wd;
    Real* dst = out.raw() + p * h * wd;
    for (long y = y0; y < y1; ++y) {
      for (long x = x0; x < x1; ++x) {
        dst[y * wd + x] = src[(y - dy) * wd + (x - dx)];
      }
    }
  }
  return out;
}

template <typename Real>
double max_abs_diff(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: shape mismatch " +
                     shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return m;
}

#define DCNN_INSTANTIATE(Real)                                                \
  template BasicTensor<Real> gaussian_fill<Real>(const Shape&, SeededRng&);   \
  template Real flat_inner(const BasicTensor<Real>&, const BasicTensor<Real>&); \
  template Real l2_norm(const BasicTensor<Real>&);                            \
  template BasicTensor<Real> translate(const BasicTensor<Real>&, long, long); \
  template double max_abs_diff(const BasicTensor<Real>&,                      \
                               const BasicTensor<Real>&);

DCNN_INSTANTIATE(float)
DCNN_INSTANTIATE(double)
#undef DCNN_INSTANTIATE

}  // namespace dcnn
