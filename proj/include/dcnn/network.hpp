#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dcnn/arch.hpp"
#include "dcnn/layers.hpp"

namespace dcnn::nn {

/// Ordered layer stack. Single-owner: forward() and backward() mutate the
/// cached activations of every layer.
template <typename Real>
class Network {
 public:
  explicit Network(Shape input_shape, std::uint64_t dropout_seed = 0);

  /// Appends a layer; throws ShapeError when it does not accept the current
  /// output shape.
  Layer<Real>& add(LayerPtr<Real> layer);

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    return static_cast<L&>(add(std::make_unique<L>(std::forward<Args>(args)...)));
  }

  std::size_t size() const noexcept { return layers_.size(); }
  Layer<Real>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<Real>& layer(std::size_t i) const { return *layers_.at(i); }
  const Shape& input_shape() const noexcept { return input_shape_; }
  /// Per-sample output shape of the last layer.
  const Shape& output_shape() const noexcept { return shapes_.back(); }

  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode mode) noexcept { mode_ = mode; }

  /// Dropout stream; copy it to replay identical masks.
  SeededRng& rng() noexcept { return rng_; }
  void set_rng(const SeededRng& rng) { rng_ = rng; }

  /// Runs every layer on a [b, c, h, w] batch and returns the last output.
  BasicTensor<Real> forward(const BasicTensor<Real>& batch);

  /// Softmax cross-entropy on the cached output against `labels`, then
  /// backpropagation. Parameter gradients are reset first. Returns the loss.
  Real backward(std::span<const std::size_t> labels);

  /// Backpropagates an explicit gradient of the loss w.r.t. the last output.
  void backward_from(const BasicTensor<Real>& grad_output);

  std::vector<Parameter<Real>*> parameters();
  std::size_t parameter_count();
  void zero_grad();

  const BasicTensor<Real>& last_output() const { return output_; }

 private:
  Shape input_shape_;
  std::vector<Shape> shapes_;
  std::vector<LayerPtr<Real>> layers_;
  Mode mode_ = Mode::Train;
  SeededRng rng_;
  BasicTensor<Real> output_;
  bool has_forward_ = false;
};

struct BuildOptions {
  std::uint64_t seed = 0;
  double dropout_rate = 0.5;
  DoubleConvPath double_conv_path = DoubleConvPath::TwoStep;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;
};

/// Layer recipe per token:
///   C      -> conv(same) BN ReLU
///   DC     -> doubleconv(same) BN ReLU
///   MC     -> conv(same) BN ReLU maxout
///   P      -> maxpool dropout
///   GAP    -> global average pool
///   SOFTMAX-> linear classifier (softmax applied by the loss)
template <typename Real>
Network<Real> build_network(const arch::ArchSpec& spec, const BuildOptions& options = {});

/// Index of the first network layer built for every arch token.
std::vector<std::size_t> token_layer_offsets(const arch::ArchSpec& spec);

using LossFn = std::function<LossResult<double>(const Tensor& output)>;

/// Compares backward() against central differences
/// (L(theta + eps) - L(theta - eps)) / (2 eps) on every parameter coordinate,
/// or on a seeded random subset of 500 when there are more. Returns the
/// largest |a - b| / max(|a|, |b|, 1e-12). Dropout masks are replayed from
/// the network's stream so every evaluation sees the same mask.
double finite_diff_check(Network<double>& net, const Tensor& batch, const LossFn& loss,
                         double epsilon, std::uint64_t sample_seed = 0);

double finite_diff_check(Network<double>& net, const Tensor& batch,
                         std::span<const std::size_t> labels, double epsilon,
                         std::uint64_t sample_seed = 0);

}  // namespace dcnn::nn
