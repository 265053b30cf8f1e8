#include <doctest.h>

#include <cmath>
#include <memory>

#include "dcnn/network.hpp"
#include "dcnn/optim.hpp"

using namespace dcnn;
using namespace dcnn::nn;

namespace {

// Loss <output, G> for a fixed random G: exercises a layer without softmax.
LossFn linear_probe(const Shape& out_shape, std::uint64_t seed) {
  SeededRng rng(seed);
  const Tensor g = gaussian_fill(out_shape, rng);
  return [g](const Tensor& out) { return LossResult<double>{flat_inner(out, g), g}; };
}

Shape batch_shape(std::size_t b, const Shape& item) {
  Shape s{b};
  s.insert(s.end(), item.begin(), item.end());
  return s;
}

double check_layer(LayerPtr<double> layer, const Shape& item, std::uint64_t seed,
                   std::size_t b = 3) {
  Network<double> net(item, seed + 100);
  net.add(std::move(layer));
  SeededRng rng(seed);
  const Tensor x = gaussian_fill(batch_shape(b, item), rng);
  const Shape out = batch_shape(b, net.output_shape());
  return finite_diff_check(net, x, linear_probe(out, seed + 1), 1e-4);
}

// Gradient with respect to the input of a parameter-free layer.
double check_input_grad(Layer<double>& layer, const Tensor& x, std::uint64_t seed) {
  SeededRng stream(seed);
  ForwardContext ctx{Mode::Train, &stream};
  SeededRng s0 = stream;
  const Tensor y = layer.forward(x, ctx);
  SeededRng gr(seed + 1);
  const Tensor g = gaussian_fill(y.shape(), gr);
  const Tensor gx = layer.backward(g);
  double worst = 0;
  const double eps = 1e-4;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor a = x, b = x;
    a[i] += eps;
    b[i] -= eps;
    SeededRng s1 = s0, s2 = s0;
    ForwardContext c1{Mode::Train, &s1}, c2{Mode::Train, &s2};
    const double num =
        (flat_inner(layer.forward(a, c1), g) - flat_inner(layer.forward(b, c2), g)) / (2 * eps);
    worst = std::max(worst, std::abs(num - gx[i]) /
                                std::max({std::abs(num), std::abs(gx[i]), 1e-12}));
  }
  return worst;
}

}  // namespace

TEST_CASE("ReLU forward") {
  ReLULayer<double> relu;
  ForwardContext ctx{Mode::Train, nullptr};
  CHECK(relu.forward(Tensor({1, 2}, {-1, 2}), ctx) == Tensor({1, 2}, {0, 2}));
}

TEST_CASE("DC-1-2-1-1 network on ones") {
  Network<double> net({1, 3, 3});
  net.emplace<DoubleConvLayer<double>>(
      MetaFilterBank<double>({1, 2, 1, 1, PoolKind::Max}, Tensor({1, 1, 2, 2}, 1.0)),
      PadSpec::valid());
  CHECK(net.forward(Tensor({1, 1, 3, 3}, 1.0)) == Tensor({1, 4, 3, 3}, 1.0));
}

TEST_CASE("softmax of uniform logits gives ln C") {
  const std::vector<std::size_t> labels{0, 3};
  const auto r = softmax_cross_entropy(Tensor({2, 5}, 0.7), labels);
  CHECK(r.loss == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  CHECK_THROWS_AS(softmax_cross_entropy(Tensor({2, 3}), labels), ParameterError);
}

TEST_CASE("zero loss gradient leaves parameter gradients zero") {
  SeededRng rng(1);
  Network<double> net({2, 4, 4});
  net.emplace<Conv2dLayer<double>>(2, 3, 3, PadSpec::same(), rng);
  net.emplace<BatchNormLayer<double>>(3);
  net.emplace<ReLULayer<double>>();
  net.forward(gaussian_fill({2, 2, 4, 4}, rng));
  net.backward_from(Tensor({2, 3, 4, 4}));
  for (auto* p : net.parameters()) CHECK(p->grad == Tensor(p->value.shape()));
}

TEST_CASE("backward before forward is a state error") {
  Network<double> net({2});
  CHECK_THROWS_AS(net.backward(std::vector<std::size_t>{0}), StateError);
}

TEST_CASE("finite differences on single layers") {
  SeededRng rng(2);
  CHECK(check_layer(std::make_unique<Conv2dLayer<double>>(2, 3, 3, PadSpec::same(), rng),
                    {2, 5, 5}, 1) < 1e-5);
  CHECK(check_layer(std::make_unique<DoubleConvLayer<double>>(
                        2, DoubleConvSpec{2, 4, 3, 2, PoolKind::Max}, PadSpec::same(), rng),
                    {2, 5, 5}, 2) < 1e-5);
  CHECK(check_layer(std::make_unique<DoubleConvLayer<double>>(
                        1, DoubleConvSpec{2, 4, 3, 1, PoolKind::Average}, PadSpec::same(), rng),
                    {1, 4, 4}, 3) < 1e-5);
  CHECK(check_layer(std::make_unique<BatchNormLayer<double>>(3), {3, 2, 2}, 4) < 1e-5);
  CHECK(check_layer(std::make_unique<SoftmaxXentLayer<double>>(4, 3, rng), {4}, 5) < 1e-5);
}

TEST_CASE("input gradients of parameter-free layers") {
  SeededRng rng(3);
  const Tensor x = gaussian_fill({2, 4, 4, 4}, rng);
  ReLULayer<double> relu;
  CHECK(check_input_grad(relu, x, 1) < 1e-5);
  MaxPoolLayer<double> pool(2);
  CHECK(check_input_grad(pool, x, 2) < 1e-5);
  GlobalAvgPoolLayer<double> gap;
  CHECK(check_input_grad(gap, x, 3) < 1e-5);
  MaxoutLayer<double> maxout(2);
  CHECK(check_input_grad(maxout, x, 4) < 1e-5);
  DropoutLayer<double> drop(0.5);
  CHECK(check_input_grad(drop, x, 5) < 1e-5);
  BatchNormLayer<double> bn(4);
  CHECK(check_input_grad(bn, x, 6) < 1e-5);
}

TEST_CASE("small stack gradient check") {
  // DC-2-3-2-2 + BN + ReLU + GAP + softmax, seed 3
  SeededRng rng(3);
  Network<double> net({1, 4, 4});
  net.emplace<DoubleConvLayer<double>>(1, DoubleConvSpec{2, 3, 2, 2, PoolKind::Max},
                                       PadSpec::valid(), rng);
  net.emplace<BatchNormLayer<double>>(2);
  net.emplace<ReLULayer<double>>();
  net.emplace<GlobalAvgPoolLayer<double>>();
  net.emplace<SoftmaxXentLayer<double>>(2, 3, rng);
  const Tensor x = gaussian_fill({4, 1, 4, 4}, rng);
  const std::vector<std::size_t> labels{0, 1, 2, 1};
  CHECK(finite_diff_check(net, x, labels, 1e-4) < 1e-5);
}

TEST_CASE("finite_diff_check on a linear model and epsilon bounds") {
  Network<double> net({1, 1, 1});
  net.emplace<Conv2dLayer<double>>(Tensor({1, 1, 1, 1}, {0.3}), PadSpec::valid());
  const Tensor x({2, 1, 1, 1}, {1.5, -2});
  LossFn sum = [](const Tensor& out) {
    double s = 0;
    for (double v : out.data()) s += v;
    return LossResult<double>{s, Tensor(out.shape(), 1.0)};
  };
  CHECK(finite_diff_check(net, x, sum, 1e-4) < 1e-9);
  CHECK_THROWS_AS(finite_diff_check(net, x, sum, 1.0), ParameterError);
}

TEST_CASE("z' = z double conv layer has plain conv gradients") {
  SeededRng rng(4);
  const Tensor w = gaussian_fill({3, 2, 3, 3}, rng), x = gaussian_fill({2, 2, 5, 5}, rng),
               g = gaussian_fill({2, 3, 5, 5}, rng);
  Conv2dLayer<double> conv(w, PadSpec::same());
  DoubleConvLayer<double> dc(MetaFilterBank<double>({3, 3, 3, 1, PoolKind::Max}, w),
                             PadSpec::same());
  ForwardContext ctx{Mode::Train, nullptr};
  CHECK(conv.forward(x, ctx) == dc.forward(x, ctx));
  CHECK(conv.backward(g) == dc.backward(g));
  CHECK(conv.parameters()[0]->grad == dc.parameters()[0]->grad);
}

TEST_CASE("batch norm") {
  BatchNormLayer<double> bn(2);
  ForwardContext train{Mode::Train, nullptr};
  const Tensor constant({3, 2, 2, 2}, 0.8);
  const Tensor out = bn.forward(constant, train);
  for (double v : out.data()) CHECK(std::abs(v) <= 1e-2);

  BatchNormLayer<double> zero_gamma(2);
  zero_gamma.gamma().value.fill(0);
  zero_gamma.beta().value = Tensor({2}, {0.5, -1});
  SeededRng rng(5);
  const Tensor x = gaussian_fill({4, 2, 3, 3}, rng);
  const Tensor y = zero_gamma.forward(x, train);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t p = 0; p < 9; ++p) {
      CHECK(y[i * 18 + p] == 0.5);
      CHECK(y[i * 18 + 9 + p] == -1);
    }
  }

  BatchNormLayer<double> plain(2);
  const Tensor z = plain.forward(x, train);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t p = 0; p < 9; ++p) mean += z[i * 18 + c * 9 + p];
    }
    mean /= 36;
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t p = 0; p < 9; ++p) var += std::pow(z[i * 18 + c * 9 + p] - mean, 2);
    }
    var /= 36;
    CHECK(std::abs(mean) < 1e-10);
    // Standardized with eps_bn = 1e-5 added to the batch variance.
    CHECK(std::abs(var - 1) < 1e-4);
  }
  CHECK_THROWS_AS(plain.forward(Tensor({1, 2}), train), ParameterError);
}

TEST_CASE("batch norm running statistics") {
  BatchNormLayer<double> bn(1, 1e-5, 0.9);
  ForwardContext train{Mode::Train, nullptr}, eval{Mode::Eval, nullptr};
  bn.forward(Tensor({2, 1}, {1, 3}), train);
  CHECK(bn.running_mean()[0] == doctest::Approx(0.2));
  CHECK(bn.running_var()[0] == doctest::Approx(0.9 + 0.1 * 1.0));
  const Tensor y = bn.forward(Tensor({1, 1}, {0.2}), eval);
  CHECK(y[0] == doctest::Approx(0.0));
}

TEST_CASE("dropout") {
  SeededRng rng(9);
  ForwardContext train{Mode::Train, &rng}, eval{Mode::Eval, &rng};
  SeededRng data(1);
  const Tensor x = gaussian_fill({2, 10}, data);
  DropoutLayer<double> none(0.0);
  CHECK(none.forward(x, train) == x);
  DropoutLayer<double> half(0.5);
  CHECK(half.forward(x, eval) == x);
  const Tensor big = half.forward(Tensor({1000, 1000}, 1.0), train);
  double sum = 0;
  for (double v : big.data()) sum += v;
  CHECK(std::abs(sum / 1e6 - 1) < 0.01);
  CHECK_THROWS_AS(DropoutLayer<double>(1.0), ParameterError);
  CHECK_THROWS_AS(DropoutLayer<double>(-0.1), ParameterError);
}

TEST_CASE("maxout picks group maxima") {
  MaxoutLayer<double> m(2);
  ForwardContext ctx{Mode::Train, nullptr};
  const Tensor x({1, 4, 1, 1}, {1, 3, 5, 2});
  CHECK(m.forward(x, ctx) == Tensor({1, 2, 1, 1}, {3, 5}));
  CHECK(m.backward(Tensor({1, 2, 1, 1}, {1, 1})) == Tensor({1, 4, 1, 1}, {0, 1, 1, 0}));
  CHECK_THROWS_AS(m.output_shape({3, 2, 2}), ShapeError);
}

TEST_CASE("maxpool gradient goes to the first maximum") {
  MaxPoolLayer<double> p(2);
  ForwardContext ctx{Mode::Train, nullptr};
  p.forward(Tensor({1, 1, 2, 2}, {4, 4, 1, 4}), ctx);
  CHECK(p.backward(Tensor({1, 1, 1, 1}, {1})) == Tensor({1, 1, 2, 2}, {1, 0, 0, 0}));
}

TEST_CASE("evaluation mode is deterministic") {
  arch::ArchSpec spec = arch::parse_config("input: 1,8,8\nDC-4-4-3-2\nP-2\nC-4-3\nP-2\nGAP\nSOFTMAX-3\n");
  auto net = build_network<double>(spec, {.seed = 5});
  SeededRng rng(1);
  const Tensor x = gaussian_fill({3, 1, 8, 8}, rng);
  net.set_mode(Mode::Eval);
  CHECK(net.forward(x) == net.forward(x));
}

TEST_CASE("maxout vs MaxoutDCNN parameter ratio") {
  // DC layer with c_out meta filters 4x4, z = 3 versus a maxout conv layer
  // producing the same channels with stride (z'-z+1)^2 = 4.
  const auto dc = arch::parse_config("input: 3,8,8\nDC-8-4-3-2\nGAP\nSOFTMAX-2\n");
  const auto mc = arch::parse_config("input: 3,8,8\nMC-32-3-4\nGAP\nSOFTMAX-2\n");
  CHECK(arch::relative_params(dc, mc) == Rational(4, 9));
  CHECK(dc.layers[0].output_shape == mc.layers[0].output_shape);
}

TEST_CASE("adadelta") {
  Parameter<double> p{"w", Tensor({3}, {1, -2, 0.5}), Tensor({3})};
  std::vector<Parameter<double>*> ps{&p};
  OptimizerState<double> st;
  adadelta_step<double>(ps, st);
  CHECK(p.value == Tensor({3}, {1, -2, 0.5}));
  CHECK(st.sq_grad[0] == Tensor({3}));
  CHECK(st.sq_update[0] == Tensor({3}));

  // Scalar recurrence by hand.
  Parameter<double> s{"s", Tensor({1}, {0.0}), Tensor({1}, {1.0})};
  std::vector<Parameter<double>*> ss{&s};
  OptimizerState<double> sst;
  double eg = 0, ex = 0, x = 0;
  for (int step = 0; step < 5; ++step) {
    adadelta_step<double>(ss, sst);
    eg = 0.95 * eg + 0.05;
    const double dx = -std::sqrt(ex + 1e-6) / std::sqrt(eg + 1e-6);
    ex = 0.95 * ex + 0.05 * dx * dx;
    x += dx;
    CHECK(s.value[0] == doctest::Approx(x).epsilon(1e-14));
    if (step == 0) CHECK(dx == doctest::Approx(-std::sqrt(1e-6 / (0.05 + 1e-6))));
  }

  s.grad[0] = std::nan("");
  CHECK_THROWS_AS(adadelta_step<double>(ss, sst), NumericError);
}

TEST_CASE("adadelta trajectories are reproducible") {
  auto run = [] {
    SeededRng rng(4);
    Parameter<double> p{"w", gaussian_fill({5}, rng), Tensor({5})};
    std::vector<Parameter<double>*> ps{&p};
    OptimizerState<double> st;
    for (int i = 0; i < 10; ++i) {
      p.grad = gaussian_fill({5}, rng);
      adadelta_step<double>(ps, st);
    }
    return p.value;
  };
  CHECK(run() == run());
}

TEST_CASE("sgd") {
  Parameter<double> p{"w", Tensor({1}, {1.0}), Tensor({1}, {0.5})};
  std::vector<Parameter<double>*> ps{&p};
  sgd_step<double>(ps, 0.1);
  CHECK(p.value[0] == doctest::Approx(0.95));
  p.grad.fill(0);
  sgd_step<double>(ps, 0.1);
  CHECK(p.value[0] == doctest::Approx(0.95));
  CHECK_THROWS_AS(sgd_step<double>(ps, 0.0), ParameterError);
}

TEST_CASE("sgd and adadelta descend in the same direction") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SeededRng rng(seed);
    const Tensor start = gaussian_fill({6}, rng), g = gaussian_fill({6}, rng);
    Parameter<double> a{"a", start, g}, b{"b", start, g};
    std::vector<Parameter<double>*> pa{&a}, pb{&b};
    OptimizerState<double> st;
    adadelta_step<double>(pa, st);
    sgd_step<double>(pb, 0.01);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK((a.value[i] - start[i]) * (b.value[i] - start[i]) > 0);
    }
  }
}

TEST_CASE("loss decreases on a separable toy problem with both optimizers") {
  const auto spec = arch::parse_config("input: 1,6,6\nC-4-3\nGAP\nSOFTMAX-2\n");
  std::vector<int> improved(2, 0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SeededRng rng(seed);
    Tensor x = gaussian_fill({16, 1, 6, 6}, rng);
    std::vector<std::size_t> labels(16);
    for (std::size_t i = 0; i < 16; ++i) {
      labels[i] = i % 2;
      for (std::size_t p = 0; p < 36; ++p) x[i * 36 + p] += labels[i] ? 1.0 : -1.0;
    }
    for (int opt = 0; opt < 2; ++opt) {
      auto net = build_network<double>(spec, {.seed = seed});
      OptimizerState<double> st;
      double first = 0, last = 0;
      for (int step = 0; step < 50; ++step) {
        net.forward(x);
        const double loss = net.backward(labels);
        if (step == 0) first = loss;
        last = loss;
        auto ps = net.parameters();
        if (opt == 0) adadelta_step<double>(ps, st);
        else sgd_step<double>(ps, 0.05);
      }
      if (last < first) ++improved[opt];
    }
  }
  CHECK(improved[0] >= 3);
  CHECK(improved[1] >= 3);
}

TEST_CASE("he init scale") {
  SeededRng rng(7);
  const Tensor w = he_init<double>({64, 16, 3, 3}, 16 * 9, rng);
  double sq = 0;
  for (double v : w.data()) sq += v * v;
  CHECK(std::sqrt(sq / w.size()) == doctest::Approx(std::sqrt(2.0 / 144)).epsilon(0.05));
}
