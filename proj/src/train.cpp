#include "dcnn/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "dcnn/checkpoint.hpp"

namespace dcnn::train {
namespace fs = std::filesystem;

Optimizer parse_optimizer(std::string_view text) {
  if (text == "adadelta") return Optimizer::Adadelta;
  if (text == "sgd") return Optimizer::Sgd;
  throw ParameterError("optimizer must be 'adadelta' or 'sgd', got '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (arch.layers.empty()) throw ParameterError("training needs an architecture");
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batch_size < 2) throw ParameterError("batch size must be >= 2 (batch normalization)");
  if (!(dropout >= 0 && dropout < 1)) throw ParameterError("dropout must be in [0, 1)");
  if (optimizer == Optimizer::Sgd && !(lr > 0)) throw ParameterError("sgd needs lr > 0");
  if (!(adadelta.rho > 0 && adadelta.rho < 1) || !(adadelta.eps > 0)) {
    throw ParameterError("adadelta needs 0 < rho < 1 and eps > 0");
  }
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string out = "epoch,train_loss,train_err,test_err,seconds\n";
  char buf[160];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.3f\n", m.epoch, m.train_loss,
                  m.train_err, m.test_err, m.seconds);
    out += buf;
  }
  return out;
}

namespace {

template <typename Real>
BasicTensor<Real> as_real(const Tensor& t) {
  if constexpr (std::is_same_v<Real, double>) {
    return t;
  } else {
    return t.cast<Real>();
  }
}

template <typename Real>
std::size_t count_errors(const BasicTensor<Real>& logits, std::span<const std::size_t> labels) {
  const std::size_t b = logits.dim(0), classes = logits.dim(1);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    if (best != labels[i]) ++wrong;
  }
  return wrong;
}

const data::Dataset& centered(const data::Dataset& ds, std::optional<data::Dataset>& storage) {
  if (ds.centered) return ds;
  storage = ds;
  data::center(*storage);
  return *storage;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

template <typename Real>
double evaluate(nn::Network<Real>& net, const data::Dataset& ds, std::size_t batch_size) {
  if (ds.size() == 0) throw ParameterError("cannot evaluate on an empty split");
  if (batch_size == 0) throw ParameterError("batch size must be >= 1");
  std::optional<data::Dataset> storage;
  const data::Dataset& d = centered(ds, storage);
  const nn::Mode previous = net.mode();
  net.set_mode(nn::Mode::Eval);
  std::size_t wrong = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < d.size(); start += batch_size) {
    const std::size_t end = std::min(d.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto logits = net.forward(as_real<Real>(data::gather(d.images, idx)));
    wrong += count_errors(logits, std::span(d.labels).subspan(start, end - start));
  }
  net.set_mode(previous);
  return static_cast<double>(wrong) / static_cast<double>(d.size());
}

template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const data::Dataset& train_set,
                        const data::Dataset* test_set, const EpochHook<Real>& hook) {
  config.validate();
  if (train_set.size() < 2) throw ParameterError("training split needs at least 2 images");
  if (train_set.image_shape() != config.arch.input_shape) {
    throw ShapeError("data images are " + shape_to_string(train_set.image_shape()) +
                     " but the architecture expects " + shape_to_string(config.arch.input_shape));
  }
  std::optional<data::Dataset> train_storage, test_storage;
  const data::Dataset& tr = centered(train_set, train_storage);
  const data::Dataset* te = test_set ? &centered(*test_set, test_storage) : nullptr;

  nn::BuildOptions options;
  options.seed = config.seed;
  options.dropout_rate = config.dropout;
  options.double_conv_path = config.dc_path;
  TrainResult<Real> result{nn::build_network<Real>(config.arch, options), {}};
  nn::Network<Real>& net = result.net;

  const SeededRng root(config.seed);
  SeededRng shuffle_rng(root.derive(2));
  SeededRng augment_rng(root.derive(3));
  nn::OptimizerState<Real> state;
  state.config = config.adadelta;

  const std::size_t n = tr.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> labels;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(order[i], order[j]);
    }
    net.set_mode(nn::Mode::Train);
    double loss_sum = 0;
    std::size_t seen = 0, wrong = 0, batch_index = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(n, start + config.batch_size);
      if (end - start < 2) break;  // batch normalization needs two samples
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor x = data::gather(tr.images, idx);
      if (config.augment) x = data::augment_batch(x, augment_rng);
      labels.clear();
      for (auto k : idx) labels.push_back(tr.labels[k]);
      const auto logits = net.forward(as_real<Real>(x));
      const Real loss = net.backward(labels);
      if (!std::isfinite(static_cast<double>(loss))) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      wrong += count_errors(logits, labels);
      loss_sum += static_cast<double>(loss) * static_cast<double>(idx.size());
      seen += idx.size();
      auto params = net.parameters();
      try {
        if (config.optimizer == Optimizer::Adadelta) {
          nn::adadelta_step<Real>(params, state);
        } else {
          nn::sgd_step<Real>(params, config.lr);
        }
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index));
      }
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(seen);
    m.train_err = static_cast<double>(wrong) / static_cast<double>(seen);
    m.test_err = (te && config.eval_test) ? evaluate(net, *te, config.batch_size)
                                          : std::numeric_limits<double>::quiet_NaN();
    if (config.record_time) {
      m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.history.push_back(m);
    if (hook && !hook(m, net)) break;
  }
  net.set_mode(nn::Mode::Eval);
  return result;
}

namespace {

std::string resolved_source(const std::string& source, std::uint64_t seed) {
  if (source.rfind("synthetic", 0) != 0) return source;
  data::SyntheticParams p = data::parse_synthetic(source);
  if (source.find("seed=") == std::string::npos) p.seed = seed;
  return data::render_synthetic(p);
}

template <typename Real>
std::vector<EpochMetrics> run_typed(const TrainConfig& config, const fs::path& out_dir) {
  const std::string source = resolved_source(config.data, config.seed);
  const data::Dataset tr = data::load_dataset(source, data::Split::Train);
  std::optional<data::Dataset> te;
  if (config.eval_test) te = data::load_dataset(source, data::Split::Test);
  TrainResult<Real> result = train<Real>(config, tr, te ? &*te : nullptr);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_text(out_dir / "metrics.csv", metrics_csv(result.history));
  const std::map<std::string, std::string> attrs{
      {"data", source},
      {"seed", std::to_string(config.seed)},
      {"epochs", std::to_string(result.history.size())}};
  nn::save_checkpoint(out_dir / "checkpoint", result.net, config.arch, attrs);
  return result.history;
}

template <typename Real>
double evaluate_typed(const fs::path& dir, const std::string& data_source, data::Split split) {
  auto loaded = nn::load_checkpoint<Real>(dir);
  std::string source = data_source;
  if (source.empty()) {
    const auto it = loaded.manifest.attributes.find("data");
    if (it == loaded.manifest.attributes.end()) {
      throw ParameterError("checkpoint records no data source; pass one explicitly");
    }
    source = it->second;
  }
  const data::Dataset ds = data::load_dataset(source, split);
  if (ds.image_shape() != loaded.spec.input_shape) {
    throw ShapeError("data images are " + shape_to_string(ds.image_shape()) +
                     " but the checkpoint expects " + shape_to_string(loaded.spec.input_shape));
  }
  return evaluate(loaded.net, ds);
}

}  // namespace

std::vector<EpochMetrics> run(const TrainConfig& config, int precision, const fs::path& out_dir) {
  config.validate();
  if (precision == 32) return run_typed<float>(config, out_dir);
  if (precision == 64) return run_typed<double>(config, out_dir);
  throw ParameterError("precision must be 32 or 64");
}

double evaluate_checkpoint(const fs::path& dir, const std::string& data_source,
                           data::Split split) {
  const int precision = nn::checkpoint_precision(dir);
  if (precision == 32) return evaluate_typed<float>(dir, data_source, split);
  return evaluate_typed<double>(dir, data_source, split);
}

template TrainResult<float> train<float>(const TrainConfig&, const data::Dataset&,
                                         const data::Dataset*, const EpochHook<float>&);
template TrainResult<double> train<double>(const TrainConfig&, const data::Dataset&,
                                           const data::Dataset*, const EpochHook<double>&);
template double evaluate<float>(nn::Network<float>&, const data::Dataset&, std::size_t);
template double evaluate<double>(nn::Network<double>&, const data::Dataset&, std::size_t);

}  // namespace dcnn::train
