#include "dcnn/conv.hpp"

#include <limits>

namespace dcnn {
namespace {

void require_3d(const Shape& s, const char* op) {
  if (s.size() != 3) {
    throw ShapeError(std::string(op) + ": expected [c,h,w], got " +
                     shape_to_string(s));
  }
}

void require_divisible(const Shape& s, std::size_t pool, const char* op) {
  if (pool == 0) throw ShapeError(std::string(op) + ": pool size must be >= 1");
  if (s[1] % pool != 0 || s[2] % pool != 0) {
    throw ShapeError(std::string(op) + ": spatial dims of " + shape_to_string(s) +
                     " not divisible by " + std::to_string(pool));
  }
}

}  // namespace

std::size_t PadSpec::resolve(std::size_t z) const {
  switch (mode) {
    case Mode::Valid:
      return 0;
    case Mode::Explicit:
      return amount;
    case Mode::Same:
      if (z % 2 == 0) {
        throw ShapeError("same padding requires an odd filter size, got " +
                         std::to_string(z));
      }
      return (z - 1) / 2;
  }
  return 0;
}

template <typename Real>
ConvFilterBank<Real>::ConvFilterBank(BasicTensor<Real> weights)
    : weights_(std::move(weights)) {
  if (weights_.ndim() != 4 || weights_.dim(2) != weights_.dim(3)) {
    throw ShapeError("filter bank must be [c_out,c_in,z,z], got " +
                     shape_to_string(weights_.shape()));
  }
}

template <typename Real>
BasicTensor<Real> zero_pad(const BasicTensor<Real>& input, std::size_t p) {
  require_3d(input.shape(), "zero_pad");
  if (p == 0) return input;
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t hp = h + 2 * p, wp = w + 2 * p;
  BasicTensor<Real> out({c, hp, wp});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h; ++i) {
      const Real* src = input.raw() + (ch * h + i) * w;
      std::copy(src, src + w, out.raw() + (ch * hp + i + p) * wp + p);
    }
  }
  return out;
}

template <typename Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& input,
                         const ConvFilterBank<Real>& filters, PadSpec pad) {
  require_3d(input.shape(), "conv2d");
  const std::size_t z = filters.size();
  if (input.dim(0) != filters.in_channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(0)) +
                     " channels, filters expect " +
                     std::to_string(filters.in_channels()));
  }
  const BasicTensor<Real> padded = zero_pad(input, pad.resolve(z));
  const std::size_t c = padded.dim(0), hp = padded.dim(1), wp = padded.dim(2);
  if (hp < z || wp < z) {
    throw ShapeError("conv2d: padded input " + shape_to_string(padded.shape()) +
                     " smaller than filter size " + std::to_string(z));
  }
  const std::size_t ho = hp - z + 1, wo = wp - z + 1;
  const std::size_t co = filters.out_channels();
  const BasicTensor<Real>& W = filters.weights();
  BasicTensor<Real> out({co, ho, wo});

  for (std::size_t k = 0; k < co; ++k) {
    Real* plane = out.raw() + k * ho * wo;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t di = 0; di < z; ++di) {
        for (std::size_t dj = 0; dj < z; ++dj) {
          const Real wv = W(k, ch, di, dj);
          for (std::size_t i = 0; i < ho; ++i) {
            const Real* src = padded.raw() + (ch * hp + i + di) * wp + dj;
            Real* dst = plane + i * wo;
            for (std::size_t j = 0; j < wo; ++j) dst[j] += wv * src[j];
          }
        }
      }
    }
  }
  return out;
}

template <typename Real>
BasicTensor<Real> conv2d_backward_input(const BasicTensor<Real>& grad_out,
                                        const ConvFilterBank<Real>& filters,
                                        PadSpec pad, const Shape& input_shape) {
  require_3d(input_shape, "conv2d_backward_input");
  const std::size_t z = filters.size();
  const std::size_t p = pad.resolve(z);
  const std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  const std::size_t hp = h + 2 * p, wp = w + 2 * p;
  const std::size_t ho = hp - z + 1, wo = wp - z + 1;
  const std::size_t co = filters.out_channels();
  if (grad_out.shape() != Shape{co, ho, wo}) {
    throw ShapeError("conv2d_backward_input: gradient shape " +
                     shape_to_string(grad_out.shape()) + " does not match output");
  }
  const BasicTensor<Real>& W = filters.weights();
  BasicTensor<Real> gpad({c, hp, wp});
  for (std::size_t k = 0; k < co; ++k) {
    const Real* g = grad_out.raw() + k * ho * wo;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t di = 0; di < z; ++di) {
        for (std::size_t dj = 0; dj < z; ++dj) {
          const Real wv = W(k, ch, di, dj);
          for (std::size_t i = 0; i < ho; ++i) {
            Real* dst = gpad.raw() + (ch * hp + i + di) * wp + dj;
            const Real* src = g + i * wo;
            for (std::size_t j = 0; j < wo; ++j) dst[j] += wv * src[j];
          }
        }
      }
    }
  }
  if (p == 0) return gpad;
  BasicTensor<Real> out(input_shape);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h; ++i) {
      const Real* src = gpad.raw() + (ch * hp + i + p) * wp + p;
      std::copy(src, src + w, out.raw() + (ch * h + i) * w);
    }
  }
  return out;
}

template <typename Real>
void conv2d_backward_filters(const BasicTensor<Real>& grad_out,
                             const BasicTensor<Real>& input, PadSpec pad,
                             BasicTensor<Real>& grad_w) {
  require_3d(input.shape(), "conv2d_backward_filters");
  const std::size_t z = grad_w.dim(2);
  const BasicTensor<Real> padded = zero_pad(input, pad.resolve(z));
  const std::size_t c = padded.dim(0), hp = padded.dim(1), wp = padded.dim(2);
  const std::size_t ho = hp - z + 1, wo = wp - z + 1;
  const std::size_t co = grad_w.dim(0);
  if (grad_out.shape() != Shape{co, ho, wo} || grad_w.dim(1) != c) {
    throw ShapeError("conv2d_backward_filters: inconsistent shapes");
  }
  for (std::size_t k = 0; k < co; ++k) {
    const Real* g = grad_out.raw() + k * ho * wo;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t di = 0; di < z; ++di) {
        for (std::size_t dj = 0; dj < z; ++dj) {
          Real acc = 0;
          for (std::size_t i = 0; i < ho; ++i) {
            const Real* src = padded.raw() + (ch * hp + i + di) * wp + dj;
            const Real* gr = g + i * wo;
            for (std::size_t j = 0; j < wo; ++j) acc += gr[j] * src[j];
          }
          grad_w(k, ch, di, dj) += acc;
        }
      }
    }
  }
}

template <typename Real>
BasicTensor<Real> max_pool2d(const BasicTensor<Real>& input, std::size_t s) {
  require_3d(input.shape(), "max_pool2d");
  require_divisible(input.shape(), s, "max_pool2d");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t ho = h / s, wo = w / s;
  BasicTensor<Real> out({c, ho, wo});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        Real m = -std::numeric_limits<Real>::infinity();
        for (std::size_t a = 0; a < s; ++a) {
          for (std::size_t b = 0; b < s; ++b) {
            const Real v = input(ch, i * s + a, j * s + b);
            if (v > m) m = v;
          }
        }
        out(ch, i, j) = m;
      }
    }
  }
  return out;
}

template <typename Real>
std::vector<std::size_t> max_pool2d_argmax(const BasicTensor<Real>& input,
                                           std::size_t s) {
  require_3d(input.shape(), "max_pool2d_argmax");
  require_divisible(input.shape(), s, "max_pool2d_argmax");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t ho = h / s, wo = w / s;
  std::vector<std::size_t> idx(c * ho * wo);
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        std::size_t best = (ch * h + i * s) * w + j * s;
        for (std::size_t a = 0; a < s; ++a) {
          for (std::size_t b = 0; b < s; ++b) {
            const std::size_t at = (ch * h + i * s + a) * w + j * s + b;
            if (input[at] > input[best]) best = at;
          }
        }
        idx[o++] = best;
      }
    }
  }
  return idx;
}

template <typename Real>
BasicTensor<Real> avg_pool2d(const BasicTensor<Real>& input, std::size_t s) {
  require_3d(input.shape(), "avg_pool2d");
  require_divisible(input.shape(), s, "avg_pool2d");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t ho = h / s, wo = w / s;
  const Real area = static_cast<Real>(s * s);
  BasicTensor<Real> out({c, ho, wo});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        Real acc = 0;
        for (std::size_t a = 0; a < s; ++a) {
          for (std::size_t b = 0; b < s; ++b) acc += input(ch, i * s + a, j * s + b);
        }
        out(ch, i, j) = acc / area;
      }
    }
  }
  return out;
}

template <typename Real>
BasicTensor<Real> extract_patches(const BasicTensor<Real>& input, std::size_t z) {
  require_3d(input.shape(), "extract_patches");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (z == 0 || z > h || z > w) {
    throw ShapeError("extract_patches: window " + std::to_string(z) +
                     " does not fit " + shape_to_string(input.shape()));
  }
  const std::size_t ph = h - z + 1, pw = w - z + 1;
  BasicTensor<Real> out({ph * pw, c, z, z});
  for (std::size_t a = 0; a < ph; ++a) {
    for (std::size_t b = 0; b < pw; ++b) {
      const std::size_t p = a * pw + b;
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < z; ++i) {
          for (std::size_t j = 0; j < z; ++j) {
            out(p, ch, i, j) = input(ch, a + i, b + j);
          }
        }
      }
    }
  }
  return out;
}

template <typename Real>
BasicTensor<Real> global_avg_pool(const BasicTensor<Real>& input) {
  require_3d(input.shape(), "global_avg_pool");
  const std::size_t c = input.dim(0), n = input.dim(1) * input.dim(2);
  BasicTensor<Real> out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    Real acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += input[ch * n + i];
    out[ch] = acc / static_cast<Real>(n);
  }
  return out;
}

#define DCNN_INSTANTIATE(Real)                                                   \
  template class ConvFilterBank<Real>;                                           \
  template BasicTensor<Real> zero_pad(const BasicTensor<Real>&, std::size_t);    \
  template BasicTensor<Real> conv2d(const BasicTensor<Real>&,                    \
                                    const ConvFilterBank<Real>&, PadSpec);       \
  template BasicTensor<Real> conv2d_backward_input(                              \
      const BasicTensor<Real>&, const ConvFilterBank<Real>&, PadSpec,            \
      const Shape&);                                                             \
  template void conv2d_backward_filters(const BasicTensor<Real>&,                \
                                        const BasicTensor<Real>&, PadSpec,       \
                                        BasicTensor<Real>&);                     \
  template BasicTensor<Real> max_pool2d(const BasicTensor<Real>&, std::size_t);  \
  template std::vector<std::size_t> max_pool2d_argmax(const BasicTensor<Real>&,  \
                                                      std::size_t);              \
  template BasicTensor<Real> avg_pool2d(const BasicTensor<Real>&, std::size_t);  \
  template BasicTensor<Real> extract_patches(const BasicTensor<Real>&,           \
                                             std::size_t);                       \
  template BasicTensor<Real> global_avg_pool(const BasicTensor<Real>&);

DCNN_INSTANTIATE(float)
DCNN_INSTANTIATE(double)
#undef DCNN_INSTANTIATE

}  // namespace dcnn
