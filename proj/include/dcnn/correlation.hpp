#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcnn/tensor.hpp"

namespace dcnn::correlation {

/// k-translation correlation: the largest normalized inner product between
/// `a` and `b` shifted by (dx, dy) in {-k..k}^2 \ {(0,0)}. Channels shift
/// rigidly; norms are taken over the full (unshifted) filters.
double translation_correlation(const Tensor& a, const Tensor& b, int k);

struct LayerStats {
  double mean = 0;
  /// Population standard deviation of the per-filter maxima.
  double std = 0;
  /// For every filter, its best correlation against any other filter.
  std::vector<double> maxima;
};

/// Averaged maximum k-translation correlation of a [N, c, z, z] bank.
LayerStats avg_max_translation_correlation(const Tensor& bank, int k);

/// Same statistic for a standard-normal bank of the given shape.
LayerStats gaussian_baseline(const Shape& shape, int k, std::uint64_t seed);

struct LayerRecord {
  std::string layer;
  std::size_t filters = 0;
  int k = 1;
  double rho_mean = 0;
  double rho_std = 0;
  double baseline_mean = 0;
  double baseline_std = 0;
  std::uint64_t baseline_seed = 0;
};

struct Report {
  std::vector<LayerRecord> records;
  /// Entries skipped during analysis, one message each.
  std::vector<std::string> warnings;
};

/// Analyzes every conv / doubleconv tensor listed in a checkpoint manifest
/// (meta filters at their full size) against a same-shape Gaussian bank.
/// `manifest` may be the manifest file or the directory containing it.
Report analyze_checkpoint(const std::filesystem::path& manifest, int k,
                          std::uint64_t baseline_seed = 0);

/// CSV with header layer,N,k,rho_mean,rho_std,baseline_mean,baseline_std,baseline_seed
/// and 6 significant digits.
std::string to_csv(const Report& report);

}  // namespace dcnn::correlation
