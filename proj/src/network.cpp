#include "dcnn/network.hpp"

#include <cmath>
#include <numeric>

namespace dcnn::nn {

template <typename Real>
Network<Real>::Network(Shape input_shape, std::uint64_t dropout_seed)
    : input_shape_(std::move(input_shape)), rng_(dropout_seed) {
  check_shape(input_shape_);
  shapes_.push_back(input_shape_);
}

template <typename Real>
Layer<Real>& Network<Real>::add(LayerPtr<Real> layer) {
  Shape next;
  try {
    next = layer->output_shape(shapes_.back());
  } catch (const ShapeError& e) {
    throw ShapeError("layer " + std::to_string(layers_.size()) + " (" +
                     std::string(to_string(layer->kind())) + "): " + e.what());
  }
  shapes_.push_back(std::move(next));
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

template <typename Real>
BasicTensor<Real> Network<Real>::forward(const BasicTensor<Real>& batch) {
  if (batch.ndim() != input_shape_.size() + 1 ||
      !std::equal(input_shape_.begin(), input_shape_.end(), batch.shape().begin() + 1)) {
    throw ShapeError("network input: expected [b," +
                     shape_to_string(input_shape_).substr(1) + ", got " +
                     shape_to_string(batch.shape()));
  }
  ForwardContext ctx{mode_, &rng_};
  BasicTensor<Real> x = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      x = layers_[i]->forward(x, ctx);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" +
                       std::string(to_string(layers_[i]->kind())) + "): " + e.what());
    }
  }
  output_ = x;
  has_forward_ = true;
  return x;
}

template <typename Real>
Real Network<Real>::backward(std::span<const std::size_t> labels) {
  if (!has_forward_) throw StateError("backward called before forward");
  const LossResult<Real> r = softmax_cross_entropy(output_, labels);
  backward_from(r.grad);
  return r.loss;
}

template <typename Real>
void Network<Real>::backward_from(const BasicTensor<Real>& grad_output) {
  if (!has_forward_) throw StateError("backward called before forward");
  if (grad_output.shape() != output_.shape()) {
    throw ShapeError("backward: gradient shape " + shape_to_string(grad_output.shape()) +
                     " does not match output " + shape_to_string(output_.shape()));
  }
  zero_grad();
  BasicTensor<Real> g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
}

template <typename Real>
std::vector<Parameter<Real>*> Network<Real>::parameters() {
  std::vector<Parameter<Real>*> out;
  for (auto& l : layers_) {
    for (auto* p : l->parameters()) out.push_back(p);
  }
  return out;
}

template <typename Real>
std::size_t Network<Real>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

template <typename Real>
void Network<Real>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(Real(0));
}

std::vector<std::size_t> token_layer_offsets(const arch::ArchSpec& spec) {
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& l : spec.layers) {
    offsets.push_back(at);
    at += std::visit(
        [](const auto& t) -> std::size_t {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, arch::Conv> || std::is_same_v<T, arch::DoubleConv>) {
            return 3;
          } else if constexpr (std::is_same_v<T, arch::MaxoutConv>) {
            return 4;
          } else if constexpr (std::is_same_v<T, arch::Pool>) {
            return 2;
          } else {
            return 1;
          }
        },
        l.token);
  }
  return offsets;
}

template <typename Real>
Network<Real> build_network(const arch::ArchSpec& spec, const BuildOptions& options) {
  SeededRng root(options.seed);
  SeededRng init(root.derive(0));
  Network<Real> net(spec.input_shape, root.derive(1));
  for (const auto& info : spec.layers) {
    const std::size_t in_c = net.output_shape()[0];
    std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, arch::Conv>) {
            net.template emplace<Conv2dLayer<Real>>(in_c, t.channels, t.size, PadSpec::same(),
                                                    init);
            net.template emplace<BatchNormLayer<Real>>(t.channels, options.bn_eps,
                                                       options.bn_momentum);
            net.template emplace<ReLULayer<Real>>();
          } else if constexpr (std::is_same_v<T, arch::DoubleConv>) {
            net.template emplace<DoubleConvLayer<Real>>(in_c, t.spec(), PadSpec::same(), init,
                                                        options.double_conv_path);
            net.template emplace<BatchNormLayer<Real>>(t.spec().output_channels(),
                                                       options.bn_eps, options.bn_momentum);
            net.template emplace<ReLULayer<Real>>();
          } else if constexpr (std::is_same_v<T, arch::MaxoutConv>) {
            net.template emplace<Conv2dLayer<Real>>(in_c, t.channels, t.size, PadSpec::same(),
                                                    init);
            net.template emplace<BatchNormLayer<Real>>(t.channels, options.bn_eps,
                                                       options.bn_momentum);
            net.template emplace<ReLULayer<Real>>();
            net.template emplace<MaxoutLayer<Real>>(t.stride);
          } else if constexpr (std::is_same_v<T, arch::Pool>) {
            net.template emplace<MaxPoolLayer<Real>>(t.size);
            net.template emplace<DropoutLayer<Real>>(options.dropout_rate);
          } else if constexpr (std::is_same_v<T, arch::GlobalAvgPool>) {
            net.template emplace<GlobalAvgPoolLayer<Real>>();
          } else {
            net.template emplace<SoftmaxXentLayer<Real>>(in_c, t.classes, init);
          }
        },
        info.token);
  }
  return net;
}

double finite_diff_check(Network<double>& net, const Tensor& batch, const LossFn& loss,
                         double epsilon, std::uint64_t sample_seed) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ParameterError("finite difference epsilon must be in [1e-7, 1e-3], got " +
                         std::to_string(epsilon));
  }
  const SeededRng stream = net.rng();
  std::vector<Tensor> saved_buffers;
  for (std::size_t i = 0; i < net.size(); ++i) {
    for (auto& [name, t] : net.layer(i).buffers()) saved_buffers.push_back(*t);
  }
  auto evaluate = [&]() {
    net.set_rng(stream);
    const double l = loss(net.forward(batch)).loss;
    if (!std::isfinite(l)) throw NumericError("finite_diff_check: non-finite loss");
    return l;
  };

  net.set_rng(stream);
  const Tensor out = net.forward(batch);
  const LossResult<double> base = loss(out);
  if (!std::isfinite(base.loss)) throw NumericError("finite_diff_check: non-finite loss");
  net.backward_from(base.grad);

  const auto params = net.parameters();
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->value.size(); ++i) coords.emplace_back(p, i);
  }
  constexpr std::size_t kMaxCoords = 500;
  if (coords.size() > kMaxCoords) {
    SeededRng pick(sample_seed);
    for (std::size_t i = 0; i < kMaxCoords; ++i) {
      const auto j = static_cast<std::size_t>(
          pick.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(coords.size() - 1)));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(kMaxCoords);
  }
  std::vector<double> analytic;
  analytic.reserve(coords.size());
  for (auto [p, i] : coords) analytic.push_back(params[p]->grad[i]);

  double worst = 0;
  for (std::size_t c = 0; c < coords.size(); ++c) {
    auto [p, i] = coords[c];
    double& theta = params[p]->value[i];
    const double orig = theta;
    theta = orig + epsilon;
    const double up = evaluate();
    theta = orig - epsilon;
    const double down = evaluate();
    theta = orig;
    const double numeric = (up - down) / (2 * epsilon);
    const double a = analytic[c];
    const double rel = std::abs(a - numeric) /
                       std::max({std::abs(a), std::abs(numeric), 1e-12});
    worst = std::max(worst, rel);
  }

  std::size_t k = 0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    for (auto& [name, t] : net.layer(i).buffers()) *t = saved_buffers[k++];
  }
  return worst;
}

double finite_diff_check(Network<double>& net, const Tensor& batch,
                         std::span<const std::size_t> labels, double epsilon,
                         std::uint64_t sample_seed) {
  const std::vector<std::size_t> owned(labels.begin(), labels.end());
  return finite_diff_check(
      net, batch,
      [&owned](const Tensor& logits) { return softmax_cross_entropy(logits, owned); },
      epsilon, sample_seed);
}

template class Network<float>;
template class Network<double>;
template Network<float> build_network<float>(const arch::ArchSpec&, const BuildOptions&);
template Network<double> build_network<double>(const arch::ArchSpec&, const BuildOptions&);

}  // namespace dcnn::nn
