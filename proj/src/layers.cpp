#include "dcnn/layers.hpp"

#include <cmath>
#include <limits>

namespace dcnn::nn {
namespace {

template <typename Real>
void put_item(BasicTensor<Real>& batch, std::size_t index, const BasicTensor<Real>& item) {
  std::copy(item.data().begin(), item.data().end(), batch.raw() + index * item.size());
}

Shape with_batch(std::size_t b, const Shape& item) {
  Shape s{b};
  s.insert(s.end(), item.begin(), item.end());
  return s;
}

Shape item_shape(const Shape& batch) { return Shape(batch.begin() + 1, batch.end()); }

void require_rank(const Shape& s, std::size_t rank, std::string_view layer) {
  if (s.size() != rank) {
    throw ShapeError(std::string(layer) + ": expected a rank-" + std::to_string(rank) +
                     " batch, got " + shape_to_string(s));
  }
}

template <typename Real>
void require_cache(const BasicTensor<Real>& cached, std::string_view layer) {
  if (cached.empty()) throw StateError(std::string(layer) + ": backward called before forward");
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::DoubleConv: return "doubleconv";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::GlobalAvgPool: return "gap";
    case LayerKind::Maxout: return "maxout";
    case LayerKind::SoftmaxXent: return "softmax";
  }
  return "?";
}

template <typename Real>
BasicTensor<Real> he_init(const Shape& shape, std::size_t fan_in, SeededRng& rng) {
  BasicTensor<Real> t = gaussian_fill<Real>(shape, rng);
  const Real scale = static_cast<Real>(std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : t.data()) v *= scale;
  return t;
}

// ---------------------------------------------------------------- Conv2d

template <typename Real>
Conv2dLayer<Real>::Conv2dLayer(std::size_t in_channels, std::size_t out_channels,
                               std::size_t size, PadSpec pad, SeededRng& rng)
    : Conv2dLayer(he_init<Real>({out_channels, in_channels, size, size},
                                in_channels * size * size, rng),
                  pad) {}

template <typename Real>
Conv2dLayer<Real>::Conv2dLayer(BasicTensor<Real> weights, PadSpec pad)
    : weights_{"weights", ConvFilterBank<Real>(std::move(weights)).weights(), {}}, pad_(pad) {
  weights_.grad = BasicTensor<Real>(weights_.value.shape());
}

template <typename Real>
Shape Conv2dLayer<Real>::output_shape(const Shape& input) const {
  const std::size_t z = weights_.value.dim(2), p = pad_.resolve(z);
  if (input.size() != 3 || input[0] != weights_.value.dim(1) || input[1] + 2 * p < z ||
      input[2] + 2 * p < z) {
    throw ShapeError("conv: incompatible input " + shape_to_string(input));
  }
  return {weights_.value.dim(0), input[1] + 2 * p - z + 1, input[2] + 2 * p - z + 1};
}

template <typename Real>
BasicTensor<Real> Conv2dLayer<Real>::forward(const BasicTensor<Real>& x, ForwardContext&) {
  require_rank(x.shape(), 4, "conv");
  const std::size_t b = x.dim(0);
  const ConvFilterBank<Real> bank(weights_.value);
  BasicTensor<Real> out(with_batch(b, output_shape(item_shape(x.shape()))));
  for (std::size_t i = 0; i < b; ++i) put_item(out, i, conv2d(x.slice(i), bank, pad_));
  input_ = x;
  return out;
}

template <typename Real>
BasicTensor<Real> Conv2dLayer<Real>::backward(const BasicTensor<Real>& grad_out) {
  require_cache(input_, "conv");
  const std::size_t b = input_.dim(0);
  const ConvFilterBank<Real> bank(weights_.value);
  const Shape in_item = item_shape(input_.shape());
  BasicTensor<Real> grad_in(input_.shape());
  for (std::size_t i = 0; i < b; ++i) {
    const BasicTensor<Real> g = grad_out.slice(i);
    const BasicTensor<Real> x = input_.slice(i);
    put_item(grad_in, i, conv2d_backward_input(g, bank, pad_, in_item));
    conv2d_backward_filters(g, x, pad_, weights_.grad);
  }
  return grad_in;
}

// ---------------------------------------------------------------- DoubleConv

template <typename Real>
DoubleConvLayer<Real>::DoubleConvLayer(std::size_t in_channels, DoubleConvSpec spec,
                                       PadSpec pad, SeededRng& rng, DoubleConvPath path)
    : DoubleConvLayer(
          MetaFilterBank<Real>(spec, he_init<Real>({spec.out_channels, in_channels,
                                                    spec.meta_size, spec.meta_size},
                                                   in_channels * spec.meta_size *
                                                       spec.meta_size,
                                                   rng)),
          pad, path) {}

template <typename Real>
DoubleConvLayer<Real>::DoubleConvLayer(MetaFilterBank<Real> bank, PadSpec pad,
                                       DoubleConvPath path)
    : spec_(bank.spec()),
      weights_{"meta_weights", bank.weights(), BasicTensor<Real>(bank.weights().shape())},
      pad_(pad),
      path_(path) {}

template <typename Real>
Shape DoubleConvLayer<Real>::output_shape(const Shape& input) const {
  const std::size_t z = spec_.effective_size, p = pad_.resolve(z);
  if (input.size() != 3 || input[0] != weights_.value.dim(1) || input[1] + 2 * p < z ||
      input[2] + 2 * p < z) {
    throw ShapeError("doubleconv: incompatible input " + shape_to_string(input));
  }
  return {spec_.output_channels(), input[1] + 2 * p - z + 1, input[2] + 2 * p - z + 1};
}

template <typename Real>
BasicTensor<Real> DoubleConvLayer<Real>::forward(const BasicTensor<Real>& x,
                                                 ForwardContext&) {
  require_rank(x.shape(), 4, "doubleconv");
  const std::size_t b = x.dim(0);
  const MetaFilterBank<Real> meta = bank();
  BasicTensor<Real> out(with_batch(b, output_shape(item_shape(x.shape()))));
  for (std::size_t i = 0; i < b; ++i) {
    put_item(out, i,
             path_ == DoubleConvPath::Reference ? double_conv_reference(x.slice(i), meta, pad_)
                                                : double_conv_twostep(x.slice(i), meta, pad_));
  }
  input_ = x;
  return out;
}

template <typename Real>
BasicTensor<Real> DoubleConvLayer<Real>::backward(const BasicTensor<Real>& grad_out) {
  require_cache(input_, "doubleconv");
  const std::size_t b = input_.dim(0);
  const ConvFilterBank<Real> expanded = expand_meta_filters(bank());
  const std::size_t m = spec_.response_size(), s = spec_.pool_size;
  const std::size_t g = spec_.pooled_size(), n = spec_.channel_multiplier();
  const Shape in_item = item_shape(input_.shape());
  BasicTensor<Real> grad_in(input_.shape());
  BasicTensor<Real> grad_expanded(expanded.weights().shape());

  for (std::size_t bi = 0; bi < b; ++bi) {
    const BasicTensor<Real> x = input_.slice(bi);
    const BasicTensor<Real> gout = grad_out.slice(bi);
    // The pre-pooling responses are recomputed to locate the pooled cells.
    const BasicTensor<Real> resp = conv2d(x, expanded, pad_);
    const std::size_t ho = resp.dim(1), wo = resp.dim(2);
    BasicTensor<Real> gresp(resp.shape());
    for (std::size_t k = 0; k < spec_.out_channels; ++k) {
      for (std::size_t i = 0; i < ho; ++i) {
        for (std::size_t j = 0; j < wo; ++j) {
          for (std::size_t pa = 0; pa < g; ++pa) {
            for (std::size_t pb = 0; pb < g; ++pb) {
              const Real gv = gout(k * n + pa * g + pb, i, j);
              if (spec_.pool == PoolKind::Max) {
                std::size_t best = k * m * m + (pa * s) * m + pb * s;
                for (std::size_t u = 0; u < s; ++u) {
                  for (std::size_t t = 0; t < s; ++t) {
                    const std::size_t e = k * m * m + (pa * s + u) * m + pb * s + t;
                    if (resp(e, i, j) > resp(best, i, j)) best = e;
                  }
                }
                gresp(best, i, j) += gv;
              } else {
                const Real share = gv / static_cast<Real>(s * s);
                for (std::size_t u = 0; u < s; ++u) {
                  for (std::size_t t = 0; t < s; ++t) {
                    gresp(k * m * m + (pa * s + u) * m + pb * s + t, i, j) += share;
                  }
                }
              }
            }
          }
        }
      }
    }
    put_item(grad_in, bi, conv2d_backward_input(gresp, expanded, pad_, in_item));
    conv2d_backward_filters(gresp, x, pad_, grad_expanded);
  }
  const BasicTensor<Real> folded =
      fold_expanded_gradient(grad_expanded, spec_, weights_.value.dim(1));
  for (std::size_t i = 0; i < folded.size(); ++i) weights_.grad[i] += folded[i];
  return grad_in;
}

// ---------------------------------------------------------------- BatchNorm

template <typename Real>
BatchNormLayer<Real>::BatchNormLayer(std::size_t channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_{"gamma", BasicTensor<Real>({channels}, Real(1)), BasicTensor<Real>({channels})},
      beta_{"beta", BasicTensor<Real>({channels}), BasicTensor<Real>({channels})},
      running_mean_({channels}),
      running_var_({channels}, Real(1)) {}

template <typename Real>
BasicTensor<Real> BatchNormLayer<Real>::forward(const BasicTensor<Real>& x,
                                                ForwardContext& ctx) {
  if ((x.ndim() != 2 && x.ndim() != 4) || x.dim(1) != channels_) {
    throw ShapeError("batchnorm: expected [b," + std::to_string(channels_) +
                     ",...] batch, got " + shape_to_string(x.shape()));
  }
  const std::size_t b = x.dim(0), c = channels_;
  const std::size_t hw = x.size() / (b * c);
  const std::size_t count = b * hw;
  BasicTensor<Real> out(x.shape());

  if (ctx.mode == Mode::Eval) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const Real inv = Real(1) / std::sqrt(running_var_[ch] + static_cast<Real>(eps_));
      for (std::size_t bi = 0; bi < b; ++bi) {
        const std::size_t base = (bi * c + ch) * hw;
        for (std::size_t p = 0; p < hw; ++p) {
          out[base + p] =
              gamma_.value[ch] * (x[base + p] - running_mean_[ch]) * inv + beta_.value[ch];
        }
      }
    }
    train_cache_ = false;
    xhat_ = BasicTensor<Real>();
    return out;
  }

  if (count < 2) {
    throw ParameterError("batchnorm: degenerate batch, need at least 2 values per channel");
  }
  xhat_ = BasicTensor<Real>(x.shape());
  inv_std_.assign(c, Real(0));
  for (std::size_t ch = 0; ch < c; ++ch) {
    Real sum = 0;
    for (std::size_t bi = 0; bi < b; ++bi) {
      const std::size_t base = (bi * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) sum += x[base + p];
    }
    const Real mean = sum / static_cast<Real>(count);
    Real sq = 0;
    for (std::size_t bi = 0; bi < b; ++bi) {
      const std::size_t base = (bi * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        const Real d = x[base + p] - mean;
        sq += d * d;
      }
    }
    const Real var = sq / static_cast<Real>(count);
    const Real inv = Real(1) / std::sqrt(var + static_cast<Real>(eps_));
    inv_std_[ch] = inv;
    for (std::size_t bi = 0; bi < b; ++bi) {
      const std::size_t base = (bi * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        const Real xh = (x[base + p] - mean) * inv;
        xhat_[base + p] = xh;
        out[base + p] = gamma_.value[ch] * xh + beta_.value[ch];
      }
    }
    const Real mom = static_cast<Real>(momentum_);
    running_mean_[ch] = mom * running_mean_[ch] + (Real(1) - mom) * mean;
    running_var_[ch] = mom * running_var_[ch] + (Real(1) - mom) * var;
  }
  train_cache_ = true;
  return out;
}

template <typename Real>
BasicTensor<Real> BatchNormLayer<Real>::backward(const BasicTensor<Real>& grad_out) {
  if (!train_cache_) throw StateError("batchnorm: backward needs a training-mode forward");
  const std::size_t b = xhat_.dim(0), c = channels_;
  const std::size_t hw = xhat_.size() / (b * c);
  const Real count = static_cast<Real>(b * hw);
  BasicTensor<Real> grad_in(xhat_.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    Real sum_g = 0, sum_gx = 0;
    for (std::size_t bi = 0; bi < b; ++bi) {
      const std::size_t base = (bi * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        sum_g += grad_out[base + p];
        sum_gx += grad_out[base + p] * xhat_[base + p];
      }
    }
    gamma_.grad[ch] += sum_gx;
    beta_.grad[ch] += sum_g;
    const Real scale = gamma_.value[ch] * inv_std_[ch] / count;
    for (std::size_t bi = 0; bi < b; ++bi) {
      const std::size_t base = (bi * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        grad_in[base + p] =
            scale * (count * grad_out[base + p] - sum_g - xhat_[base + p] * sum_gx);
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------- ReLU

template <typename Real>
BasicTensor<Real> ReLULayer<Real>::forward(const BasicTensor<Real>& x, ForwardContext&) {
  BasicTensor<Real> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > Real(0) ? x[i] : Real(0);
  input_ = x;
  return out;
}

template <typename Real>
BasicTensor<Real> ReLULayer<Real>::backward(const BasicTensor<Real>& grad_out) {
  require_cache(input_, "relu");
  BasicTensor<Real> grad_in(input_.shape());
  for (std::size_t i = 0; i < grad_in.size(); ++i) {
    grad_in[i] = input_[i] > Real(0) ? grad_out[i] : Real(0);
  }
  return grad_in;
}

// ---------------------------------------------------------------- Dropout

template <typename Real>
DropoutLayer<Real>::DropoutLayer(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
}

template <typename Real>
BasicTensor<Real> DropoutLayer<Real>::forward(const BasicTensor<Real>& x,
                                              ForwardContext& ctx) {
  if (ctx.mode == Mode::Eval || rate_ == 0.0) {
    mask_.assign(x.size(), Real(1));
    has_mask_ = true;
    return x;
  }
  if (!ctx.rng) throw StateError("dropout: training forward needs a random stream");
  const Real keep = static_cast<Real>(1.0 / (1.0 - rate_));
  mask_.resize(x.size());
  BasicTensor<Real> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = ctx.rng->bernoulli(rate_) ? Real(0) : keep;
    out[i] = x[i] * mask_[i];
  }
  has_mask_ = true;
  return out;
}

template <typename Real>
BasicTensor<Real> DropoutLayer<Real>::backward(const BasicTensor<Real>& grad_out) {
  if (!has_mask_) throw StateError("dropout: backward called before forward");
  BasicTensor<Real> grad_in(grad_out.shape());
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] = grad_out[i] * mask_[i];
  return grad_in;
}

// ---------------------------------------------------------------- MaxPool

template <typename Real>
MaxPoolLayer<Real>::MaxPoolLayer(std::size_t size) : size_(size) {
  if (size == 0) throw ParameterError("max pool size must be >= 1");
}

template <typename Real>
Shape MaxPoolLayer<Real>::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[1] % size_ != 0 || input[2] % size_ != 0) {
    throw ShapeError("maxpool: input " + shape_to_string(input) + " not divisible by " +
                     std::to_string(size_));
  }
  return {input[0], input[1] / size_, input[2] / size_};
}

template <typename Real>
BasicTensor<Real> MaxPoolLayer<Real>::forward(const BasicTensor<Real>& x, ForwardContext&) {
  require_rank(x.shape(), 4, "maxpool");
  const std::size_t b = x.dim(0);
  const Shape out_item = output_shape(item_shape(x.shape()));
  const std::size_t in_n = x.size() / b, out_n = shape_size(out_item);
  BasicTensor<Real> out(with_batch(b, out_item));
  argmax_.resize(b * out_n);
  for (std::size_t bi = 0; bi < b; ++bi) {
    const auto idx = max_pool2d_argmax(x.slice(bi), size_);
    for (std::size_t o = 0; o < out_n; ++o) {
      argmax_[bi * out_n + o] = bi * in_n + idx[o];
      out[bi * out_n + o] = x[bi * in_n + idx[o]];
    }
  }
  input_shape_ = x.shape();
  return out;
}

template <typename Real>
BasicTensor<Real> MaxPoolLayer<Real>::backward(const BasicTensor<Real>& grad_out) {
  if (input_shape_.empty()) throw StateError("maxpool: backward called before forward");
  BasicTensor<Real> grad_in(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) grad_in[argmax_[o]] += grad_out[o];
  return grad_in;
}

// ---------------------------------------------------------------- GAP

template <typename Real>
Shape GlobalAvgPoolLayer<Real>::output_shape(const Shape& input) const {
  if (input.size() != 3) throw ShapeError("gap: expected [c,h,w], got " + shape_to_string(input));
  return {input[0]};
}

template <typename Real>
BasicTensor<Real> GlobalAvgPoolLayer<Real>::forward(const BasicTensor<Real>& x,
                                                    ForwardContext&) {
  require_rank(x.shape(), 4, "gap");
  const std::size_t b = x.dim(0), c = x.dim(1);
  BasicTensor<Real> out({b, c});
  for (std::size_t bi = 0; bi < b; ++bi) put_item(out, bi, global_avg_pool(x.slice(bi)));
  input_shape_ = x.shape();
  return out;
}

template <typename Real>
BasicTensor<Real> GlobalAvgPoolLayer<Real>::backward(const BasicTensor<Real>& grad_out) {
  if (input_shape_.empty()) throw StateError("gap: backward called before forward");
  const std::size_t hw = input_shape_[2] * input_shape_[3];
  BasicTensor<Real> grad_in(input_shape_);
  const Real inv = Real(1) / static_cast<Real>(hw);
  for (std::size_t bc = 0; bc < grad_out.size(); ++bc) {
    const Real g = grad_out[bc] * inv;
    for (std::size_t p = 0; p < hw; ++p) grad_in[bc * hw + p] = g;
  }
  return grad_in;
}

// ---------------------------------------------------------------- Maxout

template <typename Real>
MaxoutLayer<Real>::MaxoutLayer(std::size_t stride) : stride_(stride) {
  if (stride == 0) throw ParameterError("maxout stride must be >= 1");
}

template <typename Real>
Shape MaxoutLayer<Real>::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[0] % stride_ != 0) {
    throw ShapeError("maxout: channels of " + shape_to_string(input) +
                     " not divisible by " + std::to_string(stride_));
  }
  return {input[0] / stride_, input[1], input[2]};
}

template <typename Real>
BasicTensor<Real> MaxoutLayer<Real>::forward(const BasicTensor<Real>& x, ForwardContext&) {
  require_rank(x.shape(), 4, "maxout");
  const std::size_t b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const Shape out_item = output_shape(item_shape(x.shape()));
  const std::size_t groups = out_item[0];
  BasicTensor<Real> out(with_batch(b, out_item));
  argmax_.resize(out.size());
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t gi = 0; gi < groups; ++gi) {
      for (std::size_t p = 0; p < hw; ++p) {
        std::size_t best = (bi * c + gi * stride_) * hw + p;
        for (std::size_t j = 1; j < stride_; ++j) {
          const std::size_t at = (bi * c + gi * stride_ + j) * hw + p;
          if (x[at] > x[best]) best = at;
        }
        const std::size_t o = (bi * groups + gi) * hw + p;
        argmax_[o] = best;
        out[o] = x[best];
      }
    }
  }
  input_shape_ = x.shape();
  return out;
}

template <typename Real>
BasicTensor<Real> MaxoutLayer<Real>::backward(const BasicTensor<Real>& grad_out) {
  if (input_shape_.empty()) throw StateError("maxout: backward called before forward");
  BasicTensor<Real> grad_in(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) grad_in[argmax_[o]] += grad_out[o];
  return grad_in;
}

// ---------------------------------------------------------------- Softmax head

template <typename Real>
SoftmaxXentLayer<Real>::SoftmaxXentLayer(std::size_t features, std::size_t classes,
                                         SeededRng& rng)
    : features_(features),
      classes_(classes),
      weights_{"weights", he_init<Real>({classes, features}, features, rng),
               BasicTensor<Real>({classes, features})},
      bias_{"bias", BasicTensor<Real>({classes}), BasicTensor<Real>({classes})} {}

template <typename Real>
Shape SoftmaxXentLayer<Real>::output_shape(const Shape& input) const {
  if (input != Shape{features_}) {
    throw ShapeError("softmax: expected [" + std::to_string(features_) + "] features, got " +
                     shape_to_string(input));
  }
  return {classes_};
}

template <typename Real>
BasicTensor<Real> SoftmaxXentLayer<Real>::forward(const BasicTensor<Real>& x,
                                                  ForwardContext&) {
  require_rank(x.shape(), 2, "softmax");
  output_shape(item_shape(x.shape()));
  const std::size_t b = x.dim(0);
  BasicTensor<Real> out({b, classes_});
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t k = 0; k < classes_; ++k) {
      Real acc = bias_.value[k];
      for (std::size_t f = 0; f < features_; ++f) acc += weights_.value(k, f) * x(bi, f);
      out(bi, k) = acc;
    }
  }
  input_ = x;
  return out;
}

template <typename Real>
BasicTensor<Real> SoftmaxXentLayer<Real>::backward(const BasicTensor<Real>& grad_out) {
  require_cache(input_, "softmax");
  const std::size_t b = input_.dim(0);
  BasicTensor<Real> grad_in(input_.shape());
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t k = 0; k < classes_; ++k) {
      const Real g = grad_out(bi, k);
      bias_.grad[k] += g;
      for (std::size_t f = 0; f < features_; ++f) {
        weights_.grad(k, f) += g * input_(bi, f);
        grad_in(bi, f) += g * weights_.value(k, f);
      }
    }
  }
  return grad_in;
}

template <typename Real>
LossResult<Real> softmax_cross_entropy(const BasicTensor<Real>& logits,
                                       std::span<const std::size_t> labels) {
  if (logits.ndim() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: logits " + shape_to_string(logits.shape()) +
                     " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  LossResult<Real> r{Real(0), BasicTensor<Real>(logits.shape())};
  const Real inv_b = Real(1) / static_cast<Real>(b);
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= c) {
      throw ParameterError("label " + std::to_string(labels[i]) + " out of range for " +
                           std::to_string(c) + " classes");
    }
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t k = 0; k < c; ++k) mx = std::max(mx, logits(i, k));
    Real sum = 0;
    for (std::size_t k = 0; k < c; ++k) sum += std::exp(logits(i, k) - mx);
    const Real log_z = mx + std::log(sum);
    r.loss += (log_z - logits(i, labels[i])) * inv_b;
    for (std::size_t k = 0; k < c; ++k) {
      const Real p = std::exp(logits(i, k) - log_z);
      r.grad(i, k) = (p - (k == labels[i] ? Real(1) : Real(0))) * inv_b;
    }
  }
  return r;
}

#define DCNN_INSTANTIATE(Real)                                                   \
  template BasicTensor<Real> he_init<Real>(const Shape&, std::size_t, SeededRng&); \
  template class Conv2dLayer<Real>;                                              \
  template class DoubleConvLayer<Real>;                                          \
  template class BatchNormLayer<Real>;                                           \
  template class ReLULayer<Real>;                                                \
  template class DropoutLayer<Real>;                                             \
  template class MaxPoolLayer<Real>;                                             \
  template class GlobalAvgPoolLayer<Real>;                                       \
  template class MaxoutLayer<Real>;                                              \
  template class SoftmaxXentLayer<Real>;                                         \
  template LossResult<Real> softmax_cross_entropy(const BasicTensor<Real>&,      \
                                                  std::span<const std::size_t>);

DCNN_INSTANTIATE(float)
DCNN_INSTANTIATE(double)
#undef DCNN_INSTANTIATE

}  // namespace dcnn::nn
