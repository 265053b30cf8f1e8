#include "dcnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "dcnn/dtns.hpp"

namespace dcnn::data {
namespace fs = std::filesystem;

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  throw ParameterError("split must be 'train' or 'test', got '" + std::string(text) + "'");
}

namespace {

Tensor image_mean(const Tensor& images) {
  const std::size_t n = images.dim(0);
  const Shape item(images.shape().begin() + 1, images.shape().end());
  const std::size_t len = shape_size(item);
  Tensor mean(item);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < len; ++p) mean[p] += images[i * len + p];
  }
  for (auto& v : mean.data()) v /= static_cast<double>(n);
  return mean;
}

}  // namespace

void center(Dataset& ds) {
  if (ds.centered) return;
  const std::size_t len = ds.mean.size();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t p = 0; p < len; ++p) ds.images[i * len + p] -= ds.mean[p];
  }
  ds.centered = true;
}

// ---------------------------------------------------------------- CIFAR-10

CifarRecords parse_cifar10(std::string_view bytes, const std::string& source) {
  constexpr std::size_t kPixels = 3 * 32 * 32, kRecord = kPixels + 1;
  if (bytes.empty() || bytes.size() % kRecord != 0) {
    throw FormatError(source + ": size " + std::to_string(bytes.size()) +
                      " is not a positive multiple of " + std::to_string(kRecord));
  }
  const std::size_t n = bytes.size() / kRecord;
  CifarRecords out{Tensor({n, 3, 32, 32}), std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = reinterpret_cast<const unsigned char*>(bytes.data() + i * kRecord);
    if (rec[0] > 9) {
      throw FormatError(source + ": record " + std::to_string(i) + " has label " +
                        std::to_string(rec[0]));
    }
    out.labels[i] = rec[0];
    for (std::size_t p = 0; p < kPixels; ++p) out.images[i * kPixels + p] = rec[1 + p] / 255.0;
  }
  return out;
}

namespace {

CifarRecords read_cifar_files(const std::vector<fs::path>& files) {
  std::vector<CifarRecords> parts;
  std::size_t total = 0;
  for (const auto& f : files) {
    parts.push_back(parse_cifar10(dtns::read_bytes(f), f.string()));
    total += parts.back().labels.size();
  }
  CifarRecords all{Tensor({total, 3, 32, 32}), {}};
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy(p.images.data().begin(), p.images.data().end(), all.images.raw() + at);
    at += p.images.size();
    all.labels.insert(all.labels.end(), p.labels.begin(), p.labels.end());
  }
  return all;
}

std::vector<fs::path> train_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (int i = 1; i <= 5; ++i) {
    const fs::path f = dir / ("data_batch_" + std::to_string(i) + ".bin");
    if (fs::exists(f)) files.push_back(f);
  }
  if (files.empty()) throw IoError(dir.string() + ": no data_batch_*.bin files");
  return files;
}

}  // namespace

Dataset load_cifar10(const fs::path& dir, Split split) {
  CifarRecords train = read_cifar_files(train_files(dir));
  Dataset ds;
  ds.classes = 10;
  ds.mean = image_mean(train.images);
  if (split == Split::Train) {
    ds.images = std::move(train.images);
    ds.labels = std::move(train.labels);
  } else {
    const fs::path test = dir / "test_batch.bin";
    if (!fs::exists(test)) throw IoError("missing " + test.string());
    CifarRecords t = read_cifar_files({test});
    ds.images = std::move(t.images);
    ds.labels = std::move(t.labels);
  }
  center(ds);
  return ds;
}

// ---------------------------------------------------------------- synthetic

SyntheticParams parse_synthetic(std::string_view text) {
  SyntheticParams p;
  if (text.substr(0, 9) != "synthetic") {
    throw ParameterError("not a synthetic data source: '" + std::string(text) + "'");
  }
  std::string_view rest = text.substr(9);
  if (rest.empty()) return p;
  if (rest.front() != ':') throw ParameterError("expected 'synthetic:key=value,...'");
  rest.remove_prefix(1);
  std::istringstream in{std::string(rest)};
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParameterError("synthetic option needs key=value: " + item);
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    auto as_size = [&]() {
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ParameterError("synthetic option " + key + " needs an integer");
      }
      return v;
    };
    if (key == "per_class") p.per_class = as_size();
    else if (key == "classes") p.classes = as_size();
    else if (key == "motif") p.motif = as_size();
    else if (key == "image") p.image = as_size();
    else if (key == "channels") p.channels = as_size();
    else if (key == "seed") p.seed = as_size();
    else if (key == "test_per_class") p.test_per_class = as_size();
    else if (key == "noise") {
      try {
        p.noise = std::stod(value);
      } catch (const std::exception&) {
        throw ParameterError("synthetic option noise needs a number");
      }
    } else {
      throw ParameterError("unknown synthetic option '" + key + "'");
    }
  }
  return p;
}

std::string render_synthetic(const SyntheticParams& p) {
  char noise[32];
  const auto res = std::to_chars(noise, noise + sizeof noise, p.noise);
  std::ostringstream os;
  os << "synthetic:per_class=" << p.per_class << ",classes=" << p.classes
     << ",motif=" << p.motif << ",image=" << p.image << ",channels=" << p.channels
     << ",noise=" << std::string_view(noise, res.ptr - noise) << ",seed=" << p.seed << ",test_per_class=" << p.test_per_class;
  return os.str();
}

namespace {

void validate(const SyntheticParams& p) {
  if (p.motif == 0 || p.motif >= p.image) {
    throw ParameterError("synthetic: motif size must be in [1, image size)");
  }
  if (p.classes < 1 || p.channels < 1) throw ParameterError("synthetic: empty class/channel set");
  if (p.noise < 0) throw ParameterError("synthetic: noise must be >= 0");
}

Tensor synthetic_images(const SyntheticParams& p, const Tensor& motifs, std::size_t per_class,
                        SeededRng& rng, std::vector<std::size_t>& labels) {
  const std::size_t n = per_class * p.classes, c = p.channels, s = p.image, m = p.motif;
  Tensor images({n, c, s, s});
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % p.classes;
    labels[i] = cls;
    const auto oy = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(s - m)));
    const auto ox = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(s - m)));
    double* img = images.raw() + i * c * s * s;
    for (std::size_t q = 0; q < c * s * s; ++q) img[q] = p.noise * rng.normal();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < m; ++y) {
        for (std::size_t x = 0; x < m; ++x) {
          img[(ch * s + oy + y) * s + ox + x] = motifs(cls, ch, y, x);
        }
      }
    }
  }
  return images;
}

}  // namespace

Tensor synthetic_motifs(const SyntheticParams& p) {
  validate(p);
  SeededRng rng(SeededRng(p.seed).derive(0));
  Tensor motifs({p.classes, p.channels, p.motif, p.motif});
  const std::size_t len = p.channels * p.motif * p.motif;
  for (std::size_t k = 0; k < p.classes; ++k) {
    double* dst = motifs.raw() + k * len;
    bool distinct = false;
    while (!distinct) {
      double sum = 0;
      for (std::size_t q = 0; q < len; ++q) {
        dst[q] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        sum += dst[q];
      }
      distinct = sum > 0;
      for (std::size_t j = 0; distinct && j < k; ++j) {
        distinct = !std::equal(dst, dst + len, motifs.raw() + j * len);
      }
    }
  }
  return motifs;
}

Dataset make_synthetic(const SyntheticParams& p, Split split) {
  validate(p);
  if (p.per_class == 0) throw ParameterError("synthetic: per_class must be >= 1");
  const Tensor motifs = synthetic_motifs(p);
  const SeededRng root(p.seed);
  Dataset ds;
  ds.classes = p.classes;
  SeededRng train_rng(root.derive(1));
  std::vector<std::size_t> train_labels;
  Tensor train = synthetic_images(p, motifs, p.per_class, train_rng, train_labels);
  ds.mean = image_mean(train);
  if (split == Split::Train) {
    ds.images = std::move(train);
    ds.labels = std::move(train_labels);
  } else {
    if (p.test_per_class == 0) throw ParameterError("synthetic: test split is empty");
    SeededRng test_rng(root.derive(2));
    ds.images = synthetic_images(p, motifs, p.test_per_class, test_rng, ds.labels);
  }
  return ds;
}

Dataset load_dataset(std::string_view source, Split split, std::uint64_t default_seed) {
  if (source.substr(0, 9) == "synthetic") {
    SyntheticParams p = parse_synthetic(source);
    if (source.find("seed=") == std::string_view::npos) p.seed = default_seed;
    return make_synthetic(p, split);
  }
  return load_cifar10(fs::path(source), split);
}

// ---------------------------------------------------------------- augmentation

Tensor crop_flip(const Tensor& image, std::size_t pad, std::size_t dx, std::size_t dy,
                 bool flip) {
  if (image.ndim() != 3) throw ShapeError("crop_flip: expected [c,h,w]");
  if (dx > 2 * pad || dy > 2 * pad) throw ParameterError("crop_flip: offset outside padding");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      // Row y of the crop is padded row y + dy, i.e. source row y + dy - pad.
      const long sy = static_cast<long>(y + dy) - static_cast<long>(pad);
      if (sy < 0 || sy >= static_cast<long>(h)) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const long sx = static_cast<long>(x + dx) - static_cast<long>(pad);
        if (sx < 0 || sx >= static_cast<long>(w)) continue;
        const std::size_t ox = flip ? w - 1 - x : x;
        out(ch, y, ox) = image(ch, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
      }
    }
  }
  return out;
}

Tensor augment_batch(const Tensor& batch, SeededRng& rng, std::size_t pad) {
  if (batch.ndim() != 4) throw ShapeError("augment_batch: expected [b,c,h,w]");
  Tensor out(batch.shape());
  const std::size_t len = batch.size() / batch.dim(0);
  for (std::size_t i = 0; i < batch.dim(0); ++i) {
    const auto dx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(2 * pad)));
    const auto dy = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(2 * pad)));
    const bool flip = rng.bernoulli(0.5);
    const Tensor img = crop_flip(batch.slice(i), pad, dx, dy, flip);
    std::copy(img.data().begin(), img.data().end(), out.raw() + i * len);
  }
  return out;
}

Tensor gather(const Tensor& images, std::span<const std::size_t> indices) {
  Shape shape = images.shape();
  const std::size_t len = images.size() / shape[0];
  shape[0] = indices.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy(images.raw() + indices[i] * len, images.raw() + (indices[i] + 1) * len,
              out.raw() + i * len);
  }
  return out;
}

}  // namespace dcnn::data
