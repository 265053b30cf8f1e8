#pragma once

#include <cstddef>
#include <string_view>

#include "dcnn/conv.hpp"
#include "dcnn/rational.hpp"
#include "dcnn/tensor.hpp"

namespace dcnn {

enum class PoolKind { Max, Average };

/// Shape parameters of a doubly convolutional layer: `out_channels` meta
/// filters of size meta_size x meta_size, from which every
/// effective_size x effective_size window is an effective filter. The
/// (meta - effective + 1)^2 response map of each meta filter is pooled with
/// non-overlapping pool_size windows.
struct DoubleConvSpec {
  std::size_t out_channels = 1;
  std::size_t meta_size = 1;
  std::size_t effective_size = 1;
  std::size_t pool_size = 1;
  PoolKind pool = PoolKind::Max;

  /// Throws SpecError unless meta >= effective >= 1, pool >= 1 and the
  /// response size is divisible by the pool size.
  void validate() const;

  /// Side of the per-location response map, z' - z + 1.
  std::size_t response_size() const { return meta_size - effective_size + 1; }
  std::size_t pooled_size() const { return response_size() / pool_size; }
  /// n = ((z' - z + 1) / s)^2 output channels per meta filter.
  std::size_t channel_multiplier() const { return pooled_size() * pooled_size(); }
  std::size_t output_channels() const { return channel_multiplier() * out_channels; }
  std::size_t effective_per_meta() const { return response_size() * response_size(); }

  friend bool operator==(const DoubleConvSpec&, const DoubleConvSpec&) = default;
};

enum class DcnnVariant { PlainCNN, ConcatDCNN, MaxoutDCNN, General };

std::string_view to_string(DcnnVariant v);

DcnnVariant classify_variant(const DoubleConvSpec& spec);

/// Channel gain of a ConcatDCNN layer over a plain layer with the same
/// parameter budget: (z'-z+1)^2 z^2 / z'^2. Throws VariantError when s != 1.
Rational concat_channel_multiplier(const DoubleConvSpec& spec);

template <typename Real>
class MetaFilterBank {
 public:
  /// `weights` is [out_channels, c_in, meta_size, meta_size].
  MetaFilterBank(DoubleConvSpec spec, BasicTensor<Real> weights);

  const DoubleConvSpec& spec() const noexcept { return spec_; }
  const BasicTensor<Real>& weights() const noexcept { return weights_; }
  BasicTensor<Real>& mutable_weights() noexcept { return weights_; }
  std::size_t in_channels() const noexcept { return weights_.dim(1); }

 private:
  DoubleConvSpec spec_;
  BasicTensor<Real> weights_;
};

/// Effective filters [c_out (z'-z+1)^2, c_in, z, z] by direct window copy.
/// Meta filter k owns the contiguous block starting at k (z'-z+1)^2, windows
/// ordered row-major by top-left corner.
template <typename Real>
ConvFilterBank<Real> expand_meta_filters(const MetaFilterBank<Real>& bank);

/// Same result as expand_meta_filters, computed by convolving every meta
/// filter with a reorganized identity kernel and reshaping.
template <typename Real>
ConvFilterBank<Real> expand_meta_filters_by_convolution(
    const MetaFilterBank<Real>& bank);

/// Identity matrix of order c z^2 reorganized to [c z^2, c, z, z].
template <typename Real>
ConvFilterBank<Real> identity_kernel(std::size_t channels, std::size_t z);

/// Sums gradients of the expanded filters back onto their meta filters.
template <typename Real>
BasicTensor<Real> fold_expanded_gradient(const BasicTensor<Real>& grad_expanded,
                                         const DoubleConvSpec& spec,
                                         std::size_t in_channels);

/// Direct evaluation of the double convolution: for every location and meta
/// filter, correlate each effective window with the input patch, pool the
/// response map, and write the pooled grid (row-major) into the meta
/// filter's block of n channels. Padding is resolved against the effective
/// filter size.
template <typename Real>
BasicTensor<Real> double_conv_reference(const BasicTensor<Real>& input,
                                        const MetaFilterBank<Real>& bank,
                                        PadSpec pad);

/// Two-step evaluation: expand meta filters by convolution, convolve the
/// input with all effective filters, then regroup, pool and regroup again.
/// Matches double_conv_reference exactly in either precision because both
/// paths share per-cell summation order.
template <typename Real>
BasicTensor<Real> double_conv_twostep(const BasicTensor<Real>& input,
                                      const MetaFilterBank<Real>& bank,
                                      PadSpec pad);

}  // namespace dcnn
