#include "dcnn/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dcnn/checkpoint.hpp"
#include "dcnn/dtns.hpp"

namespace dcnn::correlation {
namespace {

/// <a, T(b, dx, dy)> without materializing the translate.
double shifted_inner(const Tensor& a, const Tensor& b, long dx, long dy) {
  const long h = static_cast<long>(a.dim(a.ndim() - 2));
  const long w = static_cast<long>(a.dim(a.ndim() - 1));
  const std::size_t planes = a.size() / static_cast<std::size_t>(h * w);
  const long y0 = std::max(0L, dy), y1 = std::min(h, h + dy);
  const long x0 = std::max(0L, dx), x1 = std::min(w, w + dx);
  double acc = 0;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* pa = a.raw() + p * h * w;
    const double* pb = b.raw() + p * h * w;
    for (long y = y0; y < y1; ++y) {
      for (long x = x0; x < x1; ++x) acc += pa[y * w + x] * pb[(y - dy) * w + (x - dx)];
    }
  }
  return acc;
}

double best_shift(const Tensor& a, const Tensor& b, int k, double norm_ab) {
  double best = -std::numeric_limits<double>::infinity();
  for (long dy = -k; dy <= k; ++dy) {
    for (long dx = -k; dx <= k; ++dx) {
      if (dx == 0 && dy == 0) continue;
      best = std::max(best, shifted_inner(a, b, dx, dy) / norm_ab);
    }
  }
  // Rounding can push |rho| a hair past 1 for exact translates.
  return std::clamp(best, -1.0, 1.0);
}

void check_pair(const Tensor& a, const Tensor& b, int k) {
  if (a.shape() != b.shape()) {
    throw ShapeError("translation_correlation: shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
  if (a.ndim() < 2) throw ShapeError("translation_correlation: filters need spatial dims");
  if (k < 1) throw ParameterError("translation_correlation: k must be >= 1");
}

}  // namespace

double translation_correlation(const Tensor& a, const Tensor& b, int k) {
  check_pair(a, b, k);
  const double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0 || nb == 0) throw DegenerateError("translation_correlation: zero-norm filter");
  return best_shift(a, b, k, na * nb);
}

LayerStats avg_max_translation_correlation(const Tensor& bank, int k) {
  if (bank.ndim() != 4) {
    throw ShapeError("filter bank must be [N,c,z,z], got " + shape_to_string(bank.shape()));
  }
  const std::size_t n = bank.dim(0);
  if (n < 2) throw ShapeError("averaged correlation needs at least 2 filters");
  if (k < 1) throw ParameterError("k must be >= 1");
  std::vector<Tensor> filters;
  std::vector<double> norms;
  for (std::size_t i = 0; i < n; ++i) {
    filters.push_back(bank.slice(i));
    norms.push_back(l2_norm(filters.back()));
    if (norms.back() == 0) {
      throw DegenerateError("filter " + std::to_string(i) + " has zero norm");
    }
  }
  LayerStats stats;
  stats.maxima.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      best = std::max(best, best_shift(filters[i], filters[j], k, norms[i] * norms[j]));
    }
    stats.maxima[i] = best;
  }
  double sum = 0;
  for (double v : stats.maxima) sum += v;
  stats.mean = sum / static_cast<double>(n);
  double sq = 0;
  for (double v : stats.maxima) sq += (v - stats.mean) * (v - stats.mean);
  stats.std = std::sqrt(sq / static_cast<double>(n));
  return stats;
}

LayerStats gaussian_baseline(const Shape& shape, int k, std::uint64_t seed) {
  SeededRng rng(seed);
  return avg_max_translation_correlation(gaussian_fill<double>(shape, rng), k);
}

Report analyze_checkpoint(const std::filesystem::path& manifest, int k,
                          std::uint64_t baseline_seed) {
  std::filesystem::path file = manifest;
  if (std::filesystem::is_directory(file)) file /= nn::kManifestName;
  const nn::Manifest m = nn::read_manifest(file);
  const std::filesystem::path base = file.parent_path();
  Report report;
  for (const auto& e : m.entries) {
    if (e.kind != "conv" && e.kind != "doubleconv") continue;
    const std::string name = std::to_string(e.layer) + "-" + e.kind + "-" + e.name;
    const Tensor bank = dtns::read_file<double>(base / e.file);
    if (bank.ndim() != 4) {
      report.warnings.push_back(name + ": skipped, " + std::to_string(bank.ndim()) +
                                "-d tensor " + e.file);
      continue;
    }
    if (bank.dim(0) < 2) {
      report.warnings.push_back(name + ": skipped, fewer than 2 filters");
      continue;
    }
    const LayerStats trained = avg_max_translation_correlation(bank, k);
    const LayerStats baseline = gaussian_baseline(bank.shape(), k, baseline_seed);
    report.records.push_back({name, bank.dim(0), k, trained.mean, trained.std, baseline.mean,
                              baseline.std, baseline_seed});
  }
  return report;
}

std::string to_csv(const Report& report) {
  std::string out = "layer,N,k,rho_mean,rho_std,baseline_mean,baseline_std,baseline_seed\n";
  char buf[256];
  for (const auto& r : report.records) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%d,%.6g,%.6g,%.6g,%.6g,%llu\n", r.layer.c_str(),
                  r.filters, r.k, r.rho_mean, r.rho_std, r.baseline_mean, r.baseline_std,
                  static_cast<unsigned long long>(r.baseline_seed));
    out += buf;
  }
  return out;
}

}  // namespace dcnn::correlation
