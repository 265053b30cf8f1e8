#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>

#include "dcnn/checkpoint.hpp"
#include "dcnn/data.hpp"
#include "dcnn/train.hpp"

using namespace dcnn;
using namespace dcnn::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dcnn_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Record i: label i, pixel p of record i = (p + 7 i) mod 256.
std::string cifar_fixture(std::size_t n) {
  std::string bytes;
  for (std::size_t i = 0; i < n; ++i) {
    bytes.push_back(static_cast<char>(i));
    for (std::size_t p = 0; p < 3072; ++p) bytes.push_back(static_cast<char>((p + 7 * i) % 256));
  }
  return bytes;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char* kToy = "input: 1,12,12\nDC-4-4-3-2\nP-2\nC-4-3\nP-2\nGAP\nSOFTMAX-2\n";

train::TrainConfig toy_config() {
  train::TrainConfig c;
  c.arch = arch::parse_config(kToy);
  c.data = "synthetic:per_class=20,image=12,motif=4,test_per_class=10,seed=3";
  c.batch_size = 10;
  c.epochs = 2;
  c.seed = 11;
  c.augment = false;
  c.record_time = false;
  return c;
}

}  // namespace

TEST_CASE("CIFAR-10 record parsing") {
  const CifarRecords r = parse_cifar10(cifar_fixture(2));
  REQUIRE(r.images.shape() == Shape{2, 3, 32, 32});
  CHECK(r.labels == std::vector<std::size_t>{0, 1});
  CHECK(r.images(0, 0, 0, 0) == 0.0);
  CHECK(r.images(0, 0, 0, 5) == 5 / 255.0);
  CHECK(r.images(0, 1, 0, 0) == (1024 % 256) / 255.0);
  CHECK(r.images(1, 2, 31, 31) == ((3071 + 7) % 256) / 255.0);
  std::string bad = cifar_fixture(1);
  bad[0] = 10;
  CHECK_THROWS_AS(parse_cifar10(bad), FormatError);
  CHECK_THROWS_AS(parse_cifar10(cifar_fixture(1) + "x"), FormatError);
}

TEST_CASE("CIFAR-10 directory loading subtracts the training mean") {
  const fs::path dir = scratch("cifar");
  CHECK_THROWS_AS(load_cifar10(dir, Split::Train), IoError);
  write_bytes(dir / "data_batch_1.bin", cifar_fixture(2));
  CHECK_THROWS_AS(load_cifar10(dir, Split::Test), IoError);
  write_bytes(dir / "test_batch.bin", cifar_fixture(1));
  const Dataset tr = load_cifar10(dir, Split::Train), te = load_cifar10(dir, Split::Test);
  CHECK(tr.size() == 2);
  CHECK(tr.centered);
  CHECK(tr.mean(0, 0, 1) == doctest::Approx((1 + 8) / 2.0 / 255.0));
  CHECK(tr.images(0, 0, 0, 1) == doctest::Approx(1 / 255.0 - (1 + 8) / 2.0 / 255.0));
  CHECK(te.images(0, 0, 0, 1) == doctest::Approx(1 / 255.0 - (1 + 8) / 2.0 / 255.0));
}

TEST_CASE("full CIFAR-10 training split, when present") {
  const char* dir = std::getenv("CIFAR10_DIR");
  if (!dir || !fs::exists(fs::path(dir) / "data_batch_5.bin")) {
    MESSAGE("CIFAR10_DIR not set; skipping");
    return;
  }
  CHECK(load_cifar10(dir, Split::Train).images.shape() == Shape{50000, 3, 32, 32});
}

TEST_CASE("synthetic data") {
  SyntheticParams p;
  p.noise = 0;
  p.seed = 4;
  const Dataset a = make_synthetic(p, Split::Train), b = make_synthetic(p, Split::Train);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  CHECK(a.size() == 200);
  CHECK_FALSE(a.centered);

  // Every image contains its class motif exactly somewhere.
  const Tensor motifs = synthetic_motifs(p);
  const std::size_t s = p.image, m = p.motif;
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool found = false;
    for (std::size_t y = 0; y + m <= s && !found; ++y) {
      for (std::size_t x = 0; x + m <= s && !found; ++x) {
        bool all = true;
        for (std::size_t u = 0; u < m && all; ++u) {
          for (std::size_t v = 0; v < m && all; ++v) {
            all = a.images(i, 0, y + u, x + v) == motifs(a.labels[i], 0, u, v);
          }
        }
        found = all;
      }
    }
    CHECK(found);
  }

  SyntheticParams bad;
  bad.motif = 16;
  CHECK_THROWS_AS(make_synthetic(bad, Split::Train), ParameterError);
  CHECK(parse_synthetic(render_synthetic(p)) == p);
  CHECK(parse_synthetic("synthetic:noise=0.25,classes=3").classes == 3);
  CHECK_THROWS_AS(parse_synthetic("synthetic:bogus=1"), ParameterError);
  CHECK(load_dataset("synthetic:per_class=3", Split::Test).size() == 100);
}

TEST_CASE("noisy synthetic task is separable by template matching") {
  SyntheticParams p;  // 2 classes, 200 images, sigma 0.1
  p.seed = 1;
  const Dataset d = make_synthetic(p, Split::Train);
  const Tensor motifs = synthetic_motifs(p);
  const std::size_t s = p.image, m = p.motif;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_class = 0;
    for (std::size_t k = 0; k < p.classes; ++k) {
      for (std::size_t y = 0; y + m <= s; ++y) {
        for (std::size_t x = 0; x + m <= s; ++x) {
          double ssd = 0;
          for (std::size_t u = 0; u < m; ++u) {
            for (std::size_t v = 0; v < m; ++v) {
              ssd += std::pow(d.images(i, 0, y + u, x + v) - motifs(k, 0, u, v), 2);
            }
          }
          if (ssd < best) {
            best = ssd;
            best_class = k;
          }
        }
      }
    }
    correct += best_class == d.labels[i];
  }
  CHECK(correct == d.size());
}

TEST_CASE("augmentation") {
  SeededRng rng(1);
  const Tensor img = gaussian_fill({3, 8, 8}, rng);
  CHECK(crop_flip(img, 4, 4, 4, false) == img);
  CHECK(crop_flip(crop_flip(img, 4, 4, 4, true), 4, 4, 4, true) == img);

  Tensor spike({1, 8, 8});
  spike(0, 3, 5) = 1;
  for (std::size_t dx = 0; dx <= 8; ++dx) {
    for (std::size_t dy = 0; dy <= 8; ++dy) {
      const Tensor out = crop_flip(spike, 4, dx, dy, false);
      const long y = 3 - (static_cast<long>(dy) - 4), x = 5 - (static_cast<long>(dx) - 4);
      const bool visible = y >= 0 && y < 8 && x >= 0 && x < 8;
      double sum = 0;
      for (double v : out.data()) sum += v;
      CHECK(sum == (visible ? 1.0 : 0.0));
      if (visible) CHECK(out(0, y, x) == 1.0);
    }
  }
  const Tensor batch = gaussian_fill({4, 3, 8, 8}, rng);
  SeededRng a(5), b(5);
  CHECK(augment_batch(batch, a) == augment_batch(batch, b));
}

TEST_CASE("training is deterministic and validates its config") {
  const auto c = toy_config();
  const Dataset tr = load_dataset(c.data, Split::Train), te = load_dataset(c.data, Split::Test);
  const auto r1 = train::train<double>(c, tr, &te), r2 = train::train<double>(c, tr, &te);
  CHECK(train::metrics_csv(r1.history) == train::metrics_csv(r2.history));
  CHECK(train::metrics_csv(r1.history).rfind("epoch,train_loss,train_err,test_err,seconds\n", 0) == 0);
  CHECK(r1.history.size() == 2);

  auto bad = c;
  bad.epochs = 0;
  CHECK_THROWS_AS(train::train<double>(bad, tr), ParameterError);
  bad = c;
  bad.batch_size = 1;
  CHECK_THROWS_AS(train::train<double>(bad, tr), ParameterError);

  Dataset nan = tr;
  nan.images[0] = std::nan("");
  try {
    train::train<double>(c, nan);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("double convolution paths give identical training runs") {
  auto c = toy_config();
  const Dataset tr = load_dataset(c.data, Split::Train), te = load_dataset(c.data, Split::Test);
  const auto two = train::train<double>(c, tr, &te);
  c.dc_path = nn::DoubleConvPath::Reference;
  const auto ref = train::train<double>(c, tr, &te);
  CHECK(train::metrics_csv(two.history) == train::metrics_csv(ref.history));
}

TEST_CASE("DC tokens with z' = z train like C tokens") {
  auto c = toy_config();
  c.arch = arch::parse_config("input: 1,12,12\nDC-4-3-3-1\nP-2\nDC-4-3-3-1\nP-2\nGAP\nSOFTMAX-2\n");
  const Dataset tr = load_dataset(c.data, Split::Train), te = load_dataset(c.data, Split::Test);
  const auto dc = train::train<double>(c, tr, &te);
  c.arch = arch::parse_config("input: 1,12,12\nC-4-3\nP-2\nC-4-3\nP-2\nGAP\nSOFTMAX-2\n");
  const auto cv = train::train<double>(c, tr, &te);
  CHECK(train::metrics_csv(dc.history) == train::metrics_csv(cv.history));
}

TEST_CASE("evaluation") {
  auto c = toy_config();
  const Dataset tr = load_dataset(c.data, Split::Train);
  auto r = train::train<double>(c, tr);
  CHECK(train::evaluate(r.net, tr) == train::evaluate(r.net, tr));
  Dataset empty;
  CHECK_THROWS_AS(train::evaluate(r.net, empty), ParameterError);

  // Untrained network on a balanced 4-class set is at chance.
  const auto spec = arch::parse_config("input: 1,16,16\nC-8-3\nP-2\nC-8-3\nP-2\nGAP\nSOFTMAX-4\n");
  const Dataset big =
      load_dataset("synthetic:per_class=250,classes=4,test_per_class=1,seed=2", Split::Train);
  auto net = nn::build_network<double>(spec, {.seed = 9});
  CHECK(std::abs(train::evaluate(net, big) - 0.75) <= 0.05);
}

TEST_CASE("checkpoint round trip and on-disk run") {
  const fs::path out = scratch("run");
  auto c = toy_config();
  train::run(c, 64, out);
  CHECK(fs::exists(out / "metrics.csv"));
  const auto loaded = nn::load_checkpoint<double>(out / "checkpoint");
  CHECK(loaded.spec == c.arch);
  CHECK(loaded.manifest.attributes.at("data").find("seed=3") != std::string::npos);
  CHECK(nn::checkpoint_precision(out / "checkpoint") == 64);
  const double e1 = train::evaluate_checkpoint(out / "checkpoint", "", Split::Test);
  const double e2 = train::evaluate_checkpoint(out / "checkpoint", c.data, Split::Test);
  CHECK(e1 == e2);
  CHECK_THROWS_AS(train::evaluate_checkpoint(out / "checkpoint", "synthetic:image=14,motif=4",
                                             Split::Test),
                  ShapeError);

  // Saving the loaded network reproduces the files byte for byte.
  const fs::path again = scratch("again");
  auto reloaded = nn::load_checkpoint<double>(out / "checkpoint");
  nn::save_checkpoint(again, reloaded.net, reloaded.spec, reloaded.manifest.attributes);
  for (const auto& e : fs::directory_iterator(out / "checkpoint")) {
    CHECK(slurp(e.path()) == slurp(again / e.path().filename()));
  }
}

TEST_CASE("manifest format") {
  const auto m = nn::parse_manifest(
      "# c\nprecision 32\narch arch.cfg\nattr data synthetic\ntensor 0 conv weights a.dtns\n");
  CHECK(m.precision == 32);
  CHECK(m.arch_file == "arch.cfg");
  CHECK(m.attributes.at("data") == "synthetic");
  REQUIRE(m.entries.size() == 1);
  CHECK(m.entries[0] == nn::ManifestEntry{0, "conv", "weights", "a.dtns"});
  const auto again = nn::parse_manifest(nn::render_manifest(m));
  CHECK(again.entries == m.entries);
  CHECK(again.attributes == m.attributes);
  CHECK_THROWS_AS(nn::parse_manifest("tensor x conv w f\n"), FormatError);
  CHECK_THROWS_AS(nn::parse_manifest("bogus line\n"), FormatError);
}
