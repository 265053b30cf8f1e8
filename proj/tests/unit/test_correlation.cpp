#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "../common/oracles.hpp"
#include "dcnn/checkpoint.hpp"
#include "dcnn/correlation.hpp"
#include "dcnn/dtns.hpp"

using namespace dcnn;
using namespace dcnn::correlation;
namespace fs = std::filesystem;

namespace {

Tensor spike(std::size_t i, std::size_t j) {
  Tensor t({1, 3, 3});
  t(0, i, j) = 1;
  return t;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dcnn_corr_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor spike_bank() {
  Tensor bank({4, 1, 3, 3});
  bank(0, 0, 0, 0) = bank(1, 0, 0, 1) = bank(2, 0, 1, 0) = bank(3, 0, 1, 1) = 1;
  return bank;
}

}  // namespace

TEST_CASE("spike correlations") {
  CHECK(translation_correlation(spike(1, 1), spike(1, 2), 1) == 1.0);
  CHECK(translation_correlation(spike(0, 0), spike(2, 2), 1) == 0.0);
  CHECK(translation_correlation(spike(0, 0), spike(2, 2), 2) == 1.0);
}

TEST_CASE("seed-17 pair equals the shift enumeration") {
  SeededRng rng(17);
  const Tensor a = gaussian_fill({3, 3, 3}, rng), b = gaussian_fill({3, 3, 3}, rng);
  CHECK(translation_correlation(a, b, 2) == doctest::Approx(oracle::rho(a, b, 2)).epsilon(1e-14));
}

TEST_CASE("correlation errors") {
  CHECK_THROWS_AS(translation_correlation(Tensor({1, 3, 3}), spike(0, 0), 1), DegenerateError);
  CHECK_THROWS_AS(translation_correlation(Tensor({1, 2, 2}, 1.0), spike(0, 0), 1), ShapeError);
  CHECK_THROWS_AS(translation_correlation(spike(0, 1), spike(0, 0), 0), ParameterError);
  CHECK_THROWS_AS(avg_max_translation_correlation(Tensor({1, 1, 3, 3}, 1.0), 1), ShapeError);
}

TEST_CASE("layer statistic") {
  SeededRng rng(3);
  const Tensor pair = gaussian_fill({2, 2, 3, 3}, rng);
  const auto two = avg_max_translation_correlation(pair, 1);
  CHECK(two.maxima[0] == two.maxima[1]);
  CHECK(two.mean == two.maxima[0]);
  CHECK(two.std == 0);

  const auto ones = avg_max_translation_correlation(spike_bank(), 1);
  CHECK(ones.mean == 1.0);
  CHECK(ones.std == 0.0);

  SeededRng r23(23);
  const Tensor bank = gaussian_fill({8, 2, 3, 3}, r23);
  CHECK(avg_max_translation_correlation(bank, 1).mean ==
        doctest::Approx(oracle::rho_bar(bank, 1)).epsilon(1e-14));
}

TEST_CASE("gaussian baseline") {
  const auto a = gaussian_baseline({16, 3, 3, 3}, 1, 4), b = gaussian_baseline({16, 3, 3, 3}, 1, 4);
  CHECK(a.mean == b.mean);
  CHECK(a.maxima == b.maxima);
  double wide = 0, small = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    wide += gaussian_baseline({64, 3, 11, 11}, 1, seed).mean / 10;
    small += gaussian_baseline({64, 3, 3, 3}, 1, seed).mean / 10;
  }
  CHECK(wide > 0);
  CHECK(wide < 1);
  // Frozen from the first 10-seed pilot run (libstdc++ normal_distribution).
  CHECK(small == doctest::Approx(0.43685230410828552).epsilon(1e-12));
}

TEST_CASE("checkpoint analysis") {
  const fs::path dir = scratch("spikes");
  dtns::write_file(dir / "bank.dtns", spike_bank());
  dtns::write_file(dir / "vec.dtns", Tensor({4}, 1.0));
  dtns::write_file(dir / "single.dtns", Tensor({1, 1, 3, 3}, 1.0));
  {
    std::ofstream m(dir / "manifest.txt");
    m << "precision 64\ntensor 0 conv weights bank.dtns\ntensor 1 batchnorm gamma vec.dtns\n"
         "tensor 2 conv weights vec.dtns\ntensor 3 doubleconv meta_weights single.dtns\n";
  }
  const Report r = analyze_checkpoint(dir, 1, 5);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].layer == "0-conv-weights");
  CHECK(r.records[0].filters == 4);
  CHECK(r.records[0].rho_mean == 1.0);
  CHECK(r.records[0].baseline_mean < 1.0);
  CHECK(r.records[0].baseline_seed == 5);
  CHECK(r.warnings.size() == 2);
  const std::string csv = to_csv(r);
  CHECK(csv.rfind("layer,N,k,rho_mean,rho_std,baseline_mean,baseline_std,baseline_seed\n", 0) == 0);
  CHECK(csv.find("0-conv-weights,4,1,1,0,") != std::string::npos);

  const fs::path empty = scratch("empty");
  { std::ofstream(empty / "manifest.txt") << "precision 64\n"; }
  CHECK(analyze_checkpoint(empty / "manifest.txt", 1).records.empty());

  const fs::path broken = scratch("broken");
  { std::ofstream(broken / "manifest.txt") << "tensor 0 conv weights gone.dtns\n"; }
  try {
    analyze_checkpoint(broken, 1);
    FAIL("expected an I/O error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("gone.dtns") != std::string::npos);
  }
}
