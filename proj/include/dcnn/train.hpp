#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dcnn/arch.hpp"
#include "dcnn/data.hpp"
#include "dcnn/network.hpp"
#include "dcnn/optim.hpp"

namespace dcnn::train {

enum class Optimizer { Adadelta, Sgd };

Optimizer parse_optimizer(std::string_view text);

struct TrainConfig {
  arch::ArchSpec arch;
  /// "synthetic[:...]" or a CIFAR-10 directory; recorded in the checkpoint.
  std::string data = "synthetic";
  Optimizer optimizer = Optimizer::Adadelta;
  nn::AdadeltaConfig adadelta;
  double lr = 0.01;  // sgd only
  std::size_t batch_size = 200;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  bool augment = true;
  double dropout = 0.5;
  nn::DoubleConvPath dc_path = nn::DoubleConvPath::TwoStep;
  /// Wall-clock seconds per epoch in the metrics; 0 when off, which makes
  /// metrics.csv byte-identical across runs.
  bool record_time = true;
  bool eval_test = true;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0;
  /// Running minibatch error in training mode.
  double train_err = 0;
  /// NaN when the test split is not evaluated.
  double test_err = 0;
  double seconds = 0;
};

/// "epoch,train_loss,train_err,test_err,seconds" plus one row per epoch.
std::string metrics_csv(const std::vector<EpochMetrics>& history);

/// Called after every epoch; returning false stops training.
template <typename Real>
using EpochHook = std::function<bool(const EpochMetrics&, nn::Network<Real>&)>;

template <typename Real>
struct TrainResult {
  nn::Network<Real> net;
  std::vector<EpochMetrics> history;
};

/// Trains on an already loaded training split (centered by the caller or
/// here, using its attached mean). `test` may be null.
template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const data::Dataset& train_set,
                        const data::Dataset* test_set = nullptr,
                        const EpochHook<Real>& hook = {});

/// Classification error rate in evaluation mode; restores the previous mode.
template <typename Real>
double evaluate(nn::Network<Real>& net, const data::Dataset& ds, std::size_t batch_size = 200);

/// Loads the data named by `config.data`, trains in 32- or 64-bit, and writes
/// `out_dir/metrics.csv` plus a checkpoint in `out_dir/checkpoint`.
/// Returns the metrics history.
std::vector<EpochMetrics> run(const TrainConfig& config, int precision,
                              const std::filesystem::path& out_dir);

/// Error rate of the checkpoint in `dir` on `split` of `data_source`
/// (the source stored in the checkpoint when empty).
double evaluate_checkpoint(const std::filesystem::path& dir, const std::string& data_source,
                           data::Split split);

}  // namespace dcnn::train
