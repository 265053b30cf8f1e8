#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcnn/rng.hpp"
#include "dcnn/tensor.hpp"

namespace dcnn::data {

enum class Split { Train, Test };

Split parse_split(std::string_view text);

/// Images [n, c, h, w] with integer class labels. `mean` is the
/// per-pixel-per-channel mean of the training split; `centered` records
/// whether it has already been subtracted from `images`.
struct Dataset {
  Tensor images;
  std::vector<std::size_t> labels;
  std::size_t classes = 0;
  Tensor mean;
  bool centered = false;

  std::size_t size() const noexcept { return labels.size(); }
  Shape image_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
};

/// Subtracts `mean` unless already done.
void center(Dataset& ds);

// ---------------------------------------------------------------- CIFAR-10

struct CifarRecords {
  Tensor images;  // [n, 3, 32, 32] scaled to [0, 1]
  std::vector<std::size_t> labels;
};

/// Parses 3073-byte records: label byte, then R, G, B 32x32 planes.
CifarRecords parse_cifar10(std::string_view bytes, const std::string& source = "<memory>");

/// Train split: every data_batch_{1..5}.bin present (at least one);
/// test split: test_batch.bin. The training mean is subtracted from either.
Dataset load_cifar10(const std::filesystem::path& dir, Split split);

// ---------------------------------------------------------------- synthetic

/// Translated-motif task: each class owns a fixed random binary motif that
/// is stamped at a uniformly random position over Gaussian noise.
struct SyntheticParams {
  std::size_t per_class = 100;
  std::size_t classes = 2;
  std::size_t motif = 5;
  std::size_t image = 16;
  std::size_t channels = 1;
  double noise = 0.1;
  std::uint64_t seed = 0;
  /// Test split size per class.
  std::size_t test_per_class = 50;

  friend bool operator==(const SyntheticParams&, const SyntheticParams&) = default;
};

/// Reads "synthetic" or "synthetic:key=value,..." (keys: per_class, classes,
/// motif, image, channels, noise, seed, test_per_class).
SyntheticParams parse_synthetic(std::string_view text);
std::string render_synthetic(const SyntheticParams& p);

/// Class motifs [classes, channels, motif, motif].
Tensor synthetic_motifs(const SyntheticParams& p);

/// Uncentered images with the training mean attached. Deterministic per seed;
/// both splits share the motifs.
Dataset make_synthetic(const SyntheticParams& p, Split split);

/// "synthetic[:...]" or a CIFAR-10 directory.
Dataset load_dataset(std::string_view source, Split split, std::uint64_t default_seed = 0);

// ---------------------------------------------------------------- augmentation

/// Zero-pads `pad` cells per side, crops the original size at offset
/// (dx, dy) in padded coordinates, optionally mirrors horizontally.
Tensor crop_flip(const Tensor& image, std::size_t pad, std::size_t dx, std::size_t dy,
                 bool flip);

/// Random pad-4 crop and 0.5-probability horizontal flip per image.
Tensor augment_batch(const Tensor& batch, SeededRng& rng, std::size_t pad = 4);

/// Images at `indices` as one batch.
Tensor gather(const Tensor& images, std::span<const std::size_t> indices);

}  // namespace dcnn::data
