#include "dcnn/double_conv.hpp"

#include <limits>
#include <string>

namespace dcnn {

void DoubleConvSpec::validate() const {
  auto fail = [this](const std::string& why) {
    throw SpecError("double conv spec (c=" + std::to_string(out_channels) +
                    ", z'=" + std::to_string(meta_size) +
                    ", z=" + std::to_string(effective_size) +
                    ", s=" + std::to_string(pool_size) + "): " + why);
  };
  if (out_channels == 0) fail("meta filter count must be >= 1");
  if (effective_size == 0) fail("effective size must be >= 1");
  if (meta_size < effective_size) fail("meta size smaller than effective size");
  if (pool_size == 0) fail("pool size must be >= 1");
  if (response_size() % pool_size != 0) {
    fail("z' - z + 1 not divisible by the pool size");
  }
}

std::string_view to_string(DcnnVariant v) {
  switch (v) {
    case DcnnVariant::PlainCNN:
      return "PlainCNN";
    case DcnnVariant::ConcatDCNN:
      return "ConcatDCNN";
    case DcnnVariant::MaxoutDCNN:
      return "MaxoutDCNN";
    case DcnnVariant::General:
      return "General";
  }
  return "?";
}

DcnnVariant classify_variant(const DoubleConvSpec& spec) {
  spec.validate();
  if (spec.meta_size == spec.effective_size) return DcnnVariant::PlainCNN;
  if (spec.pool_size == 1) return DcnnVariant::ConcatDCNN;
  if (spec.pool_size == spec.response_size()) return DcnnVariant::MaxoutDCNN;
  return DcnnVariant::General;
}

Rational concat_channel_multiplier(const DoubleConvSpec& spec) {
  spec.validate();
  if (spec.pool_size != 1) {
    throw VariantError("channel multiplier is defined for s = 1 only, got s = " +
                       std::to_string(spec.pool_size));
  }
  const auto m = static_cast<std::int64_t>(spec.response_size());
  const auto z = static_cast<std::int64_t>(spec.effective_size);
  const auto zm = static_cast<std::int64_t>(spec.meta_size);
  return Rational(m * m * z * z, zm * zm);
}

template <typename Real>
MetaFilterBank<Real>::MetaFilterBank(DoubleConvSpec spec, BasicTensor<Real> weights)
    : spec_(spec), weights_(std::move(weights)) {
  spec_.validate();
  if (weights_.ndim() != 4 || weights_.dim(0) != spec_.out_channels ||
      weights_.dim(2) != spec_.meta_size || weights_.dim(3) != spec_.meta_size) {
    throw SpecError("meta filters must be [" + std::to_string(spec_.out_channels) +
                    ",c_in," + std::to_string(spec_.meta_size) + "," +
                    std::to_string(spec_.meta_size) + "], got " +
                    shape_to_string(weights_.shape()));
  }
}

template <typename Real>
ConvFilterBank<Real> expand_meta_filters(const MetaFilterBank<Real>& bank) {
  const DoubleConvSpec& spec = bank.spec();
  const std::size_t c_out = spec.out_channels, c_in = bank.in_channels();
  const std::size_t z = spec.effective_size, m = spec.response_size();
  const BasicTensor<Real>& W = bank.weights();
  BasicTensor<Real> out({c_out * m * m, c_in, z, z});
  for (std::size_t k = 0; k < c_out; ++k) {
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        const std::size_t f = (k * m + a) * m + b;
        for (std::size_t c = 0; c < c_in; ++c) {
          for (std::size_t i = 0; i < z; ++i) {
            for (std::size_t j = 0; j < z; ++j) out(f, c, i, j) = W(k, c, a + i, b + j);
          }
        }
      }
    }
  }
  return ConvFilterBank<Real>(std::move(out));
}

template <typename Real>
ConvFilterBank<Real> identity_kernel(std::size_t channels, std::size_t z) {
  const std::size_t q = channels * z * z;
  BasicTensor<Real> eye({q, channels, z, z});
  // Row r of the identity matrix, reshaped to [c, z, z], has its single one
  // at flat position r.
  for (std::size_t r = 0; r < q; ++r) eye[r * q + r] = Real(1);
  return ConvFilterBank<Real>(std::move(eye));
}

template <typename Real>
ConvFilterBank<Real> expand_meta_filters_by_convolution(
    const MetaFilterBank<Real>& bank) {
  const DoubleConvSpec& spec = bank.spec();
  const std::size_t c_out = spec.out_channels, c_in = bank.in_channels();
  const std::size_t z = spec.effective_size, m = spec.response_size();
  const std::size_t zm = spec.meta_size;
  const std::size_t q = c_in * z * z;
  const ConvFilterBank<Real> eye = identity_kernel<Real>(c_in, z);

  // Each meta filter, viewed as a [c_in, z', z'] image, convolved with the
  // identity kernel yields [c_in z^2, m, m]: channel r at (a, b) holds
  // element r of the window whose top-left corner is (a, b).
  BasicTensor<Real> out({c_out * m * m, c_in, z, z});
  const std::size_t meta_len = c_in * zm * zm;
  for (std::size_t k = 0; k < c_out; ++k) {
    BasicTensor<Real> meta(
        {c_in, zm, zm},
        std::vector<Real>(bank.weights().raw() + k * meta_len,
                          bank.weights().raw() + (k + 1) * meta_len));
    const BasicTensor<Real> windows = conv2d(meta, eye, PadSpec::valid());
    for (std::size_t r = 0; r < q; ++r) {
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
          out[((k * m + a) * m + b) * q + r] = windows(r, a, b);
        }
      }
    }
  }
  return ConvFilterBank<Real>(std::move(out));
}

template <typename Real>
BasicTensor<Real> fold_expanded_gradient(const BasicTensor<Real>& grad_expanded,
                                         const DoubleConvSpec& spec,
                                         std::size_t in_channels) {
  const std::size_t c_out = spec.out_channels, z = spec.effective_size;
  const std::size_t m = spec.response_size(), zm = spec.meta_size;
  if (grad_expanded.shape() != Shape{c_out * m * m, in_channels, z, z}) {
    throw ShapeError("fold_expanded_gradient: unexpected shape " +
                     shape_to_string(grad_expanded.shape()));
  }
  BasicTensor<Real> grad({c_out, in_channels, zm, zm});
  for (std::size_t k = 0; k < c_out; ++k) {
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        const std::size_t f = (k * m + a) * m + b;
        for (std::size_t c = 0; c < in_channels; ++c) {
          for (std::size_t i = 0; i < z; ++i) {
            for (std::size_t j = 0; j < z; ++j) {
              grad(k, c, a + i, b + j) += grad_expanded(f, c, i, j);
            }
          }
        }
      }
    }
  }
  return grad;
}

namespace {

template <typename Real>
void check_input(const BasicTensor<Real>& input, const MetaFilterBank<Real>& bank) {
  if (input.ndim() != 3) {
    throw ShapeError("double conv: expected [c,h,w] input, got " +
                     shape_to_string(input.shape()));
  }
  if (input.dim(0) != bank.in_channels()) {
    throw ShapeError("double conv: input has " + std::to_string(input.dim(0)) +
                     " channels, meta filters expect " +
                     std::to_string(bank.in_channels()));
  }
}

}  // namespace

template <typename Real>
BasicTensor<Real> double_conv_reference(const BasicTensor<Real>& input,
                                        const MetaFilterBank<Real>& bank,
                                        PadSpec pad) {
  check_input(input, bank);
  const DoubleConvSpec& spec = bank.spec();
  const std::size_t z = spec.effective_size;
  const BasicTensor<Real> P = zero_pad(input, pad.resolve(z));
  const std::size_t c_in = P.dim(0), hp = P.dim(1), wp = P.dim(2);
  if (hp < z || wp < z) {
    throw ShapeError("double conv: padded input " + shape_to_string(P.shape()) +
                     " smaller than effective size " + std::to_string(z));
  }
  const std::size_t ho = hp - z + 1, wo = wp - z + 1;
  const std::size_t m = spec.response_size(), s = spec.pool_size;
  const std::size_t g = spec.pooled_size(), n = spec.channel_multiplier();
  const BasicTensor<Real>& W = bank.weights();
  BasicTensor<Real> out({spec.output_channels(), ho, wo});
  std::vector<Real> response(m * m);

  for (std::size_t k = 0; k < spec.out_channels; ++k) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        // Response of every effective window of meta filter k to the patch.
        for (std::size_t a = 0; a < m; ++a) {
          for (std::size_t b = 0; b < m; ++b) {
            Real acc = 0;
            for (std::size_t c = 0; c < c_in; ++c) {
              for (std::size_t di = 0; di < z; ++di) {
                for (std::size_t dj = 0; dj < z; ++dj) {
                  acc += W(k, c, a + di, b + dj) * P(c, i + di, j + dj);
                }
              }
            }
            response[a * m + b] = acc;
          }
        }
        for (std::size_t pa = 0; pa < g; ++pa) {
          for (std::size_t pb = 0; pb < g; ++pb) {
            Real v;
            if (spec.pool == PoolKind::Max) {
              v = -std::numeric_limits<Real>::infinity();
              for (std::size_t u = 0; u < s; ++u) {
                for (std::size_t t = 0; t < s; ++t) {
                  const Real r = response[(pa * s + u) * m + pb * s + t];
                  if (r > v) v = r;
                }
              }
            } else {
              Real acc = 0;
              for (std::size_t u = 0; u < s; ++u) {
                for (std::size_t t = 0; t < s; ++t) {
                  acc += response[(pa * s + u) * m + pb * s + t];
                }
              }
              v = acc / static_cast<Real>(s * s);
            }
            out(k * n + pa * g + pb, i, j) = v;
          }
        }
      }
    }
  }
  return out;
}

template <typename Real>
BasicTensor<Real> double_conv_twostep(const BasicTensor<Real>& input,
                                      const MetaFilterBank<Real>& bank,
                                      PadSpec pad) {
  check_input(input, bank);
  const DoubleConvSpec& spec = bank.spec();
  const ConvFilterBank<Real> expanded = expand_meta_filters_by_convolution(bank);
  const BasicTensor<Real> responses = conv2d(input, expanded, pad);
  const std::size_t ho = responses.dim(1), wo = responses.dim(2);
  const std::size_t m = spec.response_size(), c_out = spec.out_channels;
  const std::size_t g = spec.pooled_size(), n = spec.channel_multiplier();
  const std::size_t locs = ho * wo;

  // [c_out m^2, h, w] -> [c_out h w, m, m]
  BasicTensor<Real> maps({c_out * locs, m, m});
  for (std::size_t k = 0; k < c_out; ++k) {
    for (std::size_t e = 0; e < m * m; ++e) {
      const Real* src = responses.raw() + (k * m * m + e) * locs;
      for (std::size_t l = 0; l < locs; ++l) maps[((k * locs) + l) * m * m + e] = src[l];
    }
  }
  const BasicTensor<Real> pooled = spec.pool == PoolKind::Max
                                       ? max_pool2d(maps, spec.pool_size)
                                       : avg_pool2d(maps, spec.pool_size);
  // [c_out h w, g, g] -> [c_out g^2, h, w]
  BasicTensor<Real> out({c_out * n, ho, wo});
  for (std::size_t k = 0; k < c_out; ++k) {
    for (std::size_t l = 0; l < locs; ++l) {
      const Real* src = pooled.raw() + (k * locs + l) * g * g;
      for (std::size_t q = 0; q < n; ++q) out[(k * n + q) * locs + l] = src[q];
    }
  }
  return out;
}

#define DCNN_INSTANTIATE(Real)                                                  \
  template class MetaFilterBank<Real>;                                          \
  template ConvFilterBank<Real> expand_meta_filters(const MetaFilterBank<Real>&); \
  template ConvFilterBank<Real> expand_meta_filters_by_convolution(             \
      const MetaFilterBank<Real>&);                                             \
  template ConvFilterBank<Real> identity_kernel<Real>(std::size_t, std::size_t); \
  template BasicTensor<Real> fold_expanded_gradient(                            \
      const BasicTensor<Real>&, const DoubleConvSpec&, std::size_t);            \
  template BasicTensor<Real> double_conv_reference(                             \
      const BasicTensor<Real>&, const MetaFilterBank<Real>&, PadSpec);          \
  template BasicTensor<Real> double_conv_twostep(                               \
      const BasicTensor<Real>&, const MetaFilterBank<Real>&, PadSpec);

DCNN_INSTANTIATE(float)
DCNN_INSTANTIATE(double)
#undef DCNN_INSTANTIATE

}  // namespace dcnn
