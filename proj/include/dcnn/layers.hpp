#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcnn/conv.hpp"
#include "dcnn/double_conv.hpp"
#include "dcnn/rng.hpp"
#include "dcnn/tensor.hpp"

namespace dcnn::nn {

enum class Mode { Train, Eval };

enum class LayerKind {
  Conv,
  DoubleConv,
  BatchNorm,
  ReLU,
  Dropout,
  MaxPool,
  GlobalAvgPool,
  Maxout,
  SoftmaxXent,
};

std::string_view to_string(LayerKind kind);

/// Which double convolution implementation a layer's forward pass uses.
enum class DoubleConvPath { Reference, TwoStep };

template <typename Real>
struct Parameter {
  std::string name;
  BasicTensor<Real> value;
  BasicTensor<Real> grad;
};

/// Per-call state shared by the layers of one forward pass.
struct ForwardContext {
  Mode mode = Mode::Train;
  SeededRng* rng = nullptr;
};

/// A layer maps a batch [b, ...] to a batch [b, ...]. backward() consumes the
/// gradient of the loss with respect to the last forward output, adds
/// parameter gradients into Parameter::grad, and returns the gradient with
/// respect to the input.
template <typename Real>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  /// Per-sample output shape for a per-sample input shape.
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual BasicTensor<Real> forward(const BasicTensor<Real>& x, ForwardContext& ctx) = 0;
  virtual BasicTensor<Real> backward(const BasicTensor<Real>& grad_out) = 0;

  virtual std::vector<Parameter<Real>*> parameters() { return {}; }
  /// Non-learned state saved in checkpoints (batch-norm running statistics).
  virtual std::vector<std::pair<std::string, BasicTensor<Real>*>> buffers() { return {}; }
};

template <typename Real>
using LayerPtr = std::unique_ptr<Layer<Real>>;

/// He-scaled Gaussian: standard deviation sqrt(2 / fan_in).
template <typename Real>
BasicTensor<Real> he_init(const Shape& shape, std::size_t fan_in, SeededRng& rng);

template <typename Real>
class Conv2dLayer final : public Layer<Real> {
 public:
  Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t size,
              PadSpec pad, SeededRng& rng);
  explicit Conv2dLayer(BasicTensor<Real> weights, PadSpec pad);

  LayerKind kind() const override { return LayerKind::Conv; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<Real> forward(const BasicTensor<Real>& x, ForwardContext& ctx) override;
  BasicTensor<Real> backward(const BasicTensor<Real>& grad_out) override;
  std::vector<Parameter<Real>*> parameters() override { return {&weights_}; }

 private:
  Parameter<Real> weights_;
  PadSpec pad_;
  BasicTensor<Real> input_;
};

/// Doubly convolutional layer over meta filters [c_out, c_in, z', z'].
/// Max pooling routes gradients to the first maximal response in row-major
/// order; average pooling spreads them evenly.
template <typename Real>
class DoubleConvLayer final : public Layer<Real> {
 public:
  DoubleConvLayer(std::size_t in_channels, DoubleConvSpec spec, PadSpec pad,
                  SeededRng& rng, DoubleConvPath path = DoubleConvPath::TwoStep);
  DoubleConvLayer(MetaFilterBank<Real> bank, PadSpec pad,
                  DoubleConvPath path = DoubleConvPath::TwoStep);

  LayerKind kind() const override { return LayerKind::DoubleConv; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<Real> forward(const BasicTensor<Real>& x, ForwardContext& ctx) override;
  BasicTensor<Real> backward(const BasicTensor<Real>& grad_out) override;
  std::vector<Parameter<Real>*> parameters() override { return {&weights_}; }

  const DoubleConvSpec& spec() const noexcept { return spec_; }
  DoubleConvPath path() const noexcept { return path_; }
  void set_path(DoubleConvPath path) noexcept { path_ = path; }

 private:
  MetaFilterBank<Real> bank() const { return MetaFilterBank<Real>(spec_, weights_.value); }

  DoubleConvSpec spec_;
  Parameter<Real> weights_;
  PadSpec pad_;
  DoubleConvPath path_;
  BasicTensor<Real> input_;
};

/// Per-channel batch normalization over batch and spatial positions.
template <typename Real>
class BatchNormLayer final : public Layer<Real> {
 public:
  explicit BatchNormLayer(std::size_t channels, double eps = 1e-5, double momentum = 0.9);

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<Real> forward(const BasicTensor<Real>& x, ForwardContext& ctx) override;
  BasicTensor<Real> backward(const BasicTensor<Real>& grad_out) override;
  std::vector<Parameter<Real>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<std::pair<std::string, BasicTensor<Real>*>> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
  }

  Parameter<Real>& gamma() { return gamma_; }
  Parameter<Real>& beta() { return beta_; }
  const BasicTensor<Real>& running_mean() const { return running_mean_; }
  const BasicTensor<Real>& running_var() const { return running_var_; }

 private:
  std::size_t channels_;
  double eps_, momentum_;
  Parameter<Real> gamma_, beta_;
  BasicTensor<Real> running_mean_, running_var_;
  // Training-mode cache.
  BasicTensor<Real> xhat_;
  std::vector<Real> inv_std_;
  bool train_cache_ = false;
};

template <typename Real>
class ReLULayer final : public Layer<Real> {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<Real> forward(const BasicTensor<Real>& x, ForwardContext& ctx) override;
  BasicTensor<Real> backward(const BasicTensor<Real>& grad_out) override;

 private:
  BasicTensor<Real> input_;
};

/// Inverted dropout: survivors are scaled by 1 / (1 - rate) in training.
template <typename Real>
class DropoutLayer final : public Layer<Real> {
 public:
  explicit DropoutLayer(double rate);

  LayerKind kind() const override { return LayerKind::Dropout; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<Real> forward(const BasicTensor<Real>& x, ForwardContext& ctx) override;
  BasicTensor<Real> backward(const BasicTensor<Real>& grad_out) override;

  double rate() const noexcept { return rate_; }

 private:
  double rate_;
  std::vector<Real> mask_;
  bool has_mask_ = false;
};

template <typename Real>
class MaxPoolLayer final : public Layer<Real> {
 public:
  explicit MaxPoolLayer(std::size_t size);

  LayerKind kind() const override { return LayerKind::MaxPool; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<Real> forward(const BasicTensor<Real>& x, ForwardContext& ctx) override;
  BasicTensor<Real> backward(const BasicTensor<Real>& grad_out) override;

 private:
  std::size_t size_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename Real>
class GlobalAvgPoolLayer final : public Layer<Real> {
 public:
  LayerKind kind() const override { return LayerKind::GlobalAvgPool; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<Real> forward(const BasicTensor<Real>& x, ForwardContext& ctx) override;
  BasicTensor<Real> backward(const BasicTensor<Real>& grad_out) override;

 private:
  Shape input_shape_;
};

/// Channelwise maxout: every group of `stride` consecutive channels is
/// reduced to its elementwise maximum (first maximum wins ties).
template <typename Real>
class MaxoutLayer final : public Layer<Real> {
 public:
  explicit MaxoutLayer(std::size_t stride);

  LayerKind kind() const override { return LayerKind::Maxout; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<Real> forward(const BasicTensor<Real>& x, ForwardContext& ctx) override;
  BasicTensor<Real> backward(const BasicTensor<Real>& grad_out) override;

 private:
  std::size_t stride_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Classifier head: logits = x W^T + b over [b, c] features. The softmax and
/// cross-entropy are applied by softmax_cross_entropy on these logits.
template <typename Real>
class SoftmaxXentLayer final : public Layer<Real> {
 public:
  SoftmaxXentLayer(std::size_t features, std::size_t classes, SeededRng& rng);

  LayerKind kind() const override { return LayerKind::SoftmaxXent; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<Real> forward(const BasicTensor<Real>& x, ForwardContext& ctx) override;
  BasicTensor<Real> backward(const BasicTensor<Real>& grad_out) override;
  std::vector<Parameter<Real>*> parameters() override { return {&weights_, &bias_}; }

 private:
  std::size_t features_, classes_;
  Parameter<Real> weights_, bias_;
  BasicTensor<Real> input_;
};

template <typename Real>
struct LossResult {
  Real loss;
  /// d loss / d logits, same shape as the logits.
  BasicTensor<Real> grad;
};

/// Mean softmax cross-entropy over the batch. Labels must be < classes.
template <typename Real>
LossResult<Real> softmax_cross_entropy(const BasicTensor<Real>& logits,
                                       std::span<const std::size_t> labels);

}  // namespace dcnn::nn
