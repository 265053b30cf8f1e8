#pragma once

#include <cstddef>

#include "dcnn/tensor.hpp"

namespace dcnn {

/// Zero padding applied to each spatial side before a convolution.
struct PadSpec {
  enum class Mode { Valid, Same, Explicit };

  Mode mode = Mode::Valid;
  std::size_t amount = 0;

  static PadSpec valid() { return {Mode::Valid, 0}; }
  /// Output keeps the input's spatial size; requires an odd filter size.
  static PadSpec same() { return {Mode::Same, 0}; }
  static PadSpec explicit_pad(std::size_t p) { return {Mode::Explicit, p}; }

  /// Per-side padding for filter size `z`.
  std::size_t resolve(std::size_t z) const;

  friend bool operator==(const PadSpec&, const PadSpec&) = default;
};

/// c_out filters of shape [c_in, z, z].
template <typename Real>
class ConvFilterBank {
 public:
  explicit ConvFilterBank(BasicTensor<Real> weights);

  const BasicTensor<Real>& weights() const noexcept { return weights_; }
  std::size_t out_channels() const noexcept { return weights_.dim(0); }
  std::size_t in_channels() const noexcept { return weights_.dim(1); }
  std::size_t size() const noexcept { return weights_.dim(2); }

 private:
  BasicTensor<Real> weights_;
};

template <typename Real>
BasicTensor<Real> zero_pad(const BasicTensor<Real>& input, std::size_t p);

/// Correlation form of convolution (no filter flip). For every output cell
/// the products are summed sequentially over (c', i', j') starting from
/// zero, so results do not depend on how the loops are scheduled.
template <typename Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& input,
                         const ConvFilterBank<Real>& filters, PadSpec pad);

/// Gradient of conv2d with respect to its input.
template <typename Real>
BasicTensor<Real> conv2d_backward_input(const BasicTensor<Real>& grad_out,
                                        const ConvFilterBank<Real>& filters,
                                        PadSpec pad, const Shape& input_shape);

/// Gradient of conv2d with respect to its filters, accumulated into `grad_w`.
template <typename Real>
void conv2d_backward_filters(const BasicTensor<Real>& grad_out,
                             const BasicTensor<Real>& input, PadSpec pad,
                             BasicTensor<Real>& grad_w);

/// Non-overlapping s x s windows; h and w must be divisible by s.
template <typename Real>
BasicTensor<Real> max_pool2d(const BasicTensor<Real>& input, std::size_t s);

template <typename Real>
BasicTensor<Real> avg_pool2d(const BasicTensor<Real>& input, std::size_t s);

/// Flat index (within the [c,h,w] input) of the first maximum of every
/// pooling window, in output order. Ties resolve to the earliest cell in
/// row-major order.
template <typename Real>
std::vector<std::size_t> max_pool2d_argmax(const BasicTensor<Real>& input,
                                           std::size_t s);

/// All z x z windows as [(h-z+1)(w-z+1), c, z, z], ordered row-major by
/// top-left corner.
template <typename Real>
BasicTensor<Real> extract_patches(const BasicTensor<Real>& input, std::size_t z);

/// Per-channel spatial mean: [c,h,w] -> [c].
template <typename Real>
BasicTensor<Real> global_avg_pool(const BasicTensor<Real>& input);

}  // namespace dcnn
