#include <doctest.h>

#include <cmath>

#include "dcnn/dtns.hpp"
#include "dcnn/tensor.hpp"

using namespace dcnn;

TEST_CASE("gaussian_fill is reproducible per seed") {
  SeededRng a(7), b(7);
  const Tensor x = gaussian_fill({2, 3, 3}, a), y = gaussian_fill({2, 3, 3}, b);
  CHECK(x.size() == 18);
  CHECK(x == y);
  SeededRng c(8);
  CHECK_FALSE(x == gaussian_fill({2, 3, 3}, c));
}

TEST_CASE("gaussian_fill sample mean is near zero") {
  SeededRng rng(3);
  double sum = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) sum += gaussian_fill({1}, rng)[0];
  CHECK(std::abs(sum / n) < 0.01);
}

TEST_CASE("zero extents are rejected") {
  SeededRng rng(1);
  CHECK_THROWS_AS(gaussian_fill({0}, rng), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{}), ShapeError);
  CHECK_THROWS_AS(Tensor({2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST_CASE("flat_inner and l2_norm") {
  CHECK(flat_inner(Tensor({3, 3}, 1.0), Tensor({3, 3}, 1.0)) == 9);
  CHECK(flat_inner(Tensor({3}, {1, 2, 3}), Tensor({3}, {4, 5, 6})) == 32);
  SeededRng rng(2);
  CHECK(flat_inner(gaussian_fill({4}, rng), Tensor({4})) == 0);
  CHECK(l2_norm(Tensor({5})) == 0);
  CHECK(l2_norm(Tensor({2}, {3, 4})) == 5);
  SeededRng r11(11);
  const Tensor a = gaussian_fill({2, 3, 3}, r11);
  CHECK(l2_norm(a) == doctest::Approx(std::sqrt(flat_inner(a, a))).epsilon(1e-15));
  CHECK_THROWS_AS(flat_inner(Tensor({3}), Tensor({4})), ShapeError);
}

TEST_CASE("translate moves a spike along width for x and height for y") {
  Tensor w({3, 3});
  w(1, 1) = 1;
  CHECK(translate(w, 0, 0) == w);
  const Tensor right = translate(w, 1, 0);
  Tensor expect({3, 3});
  expect(1, 2) = 1;
  CHECK(right == expect);
  Tensor down({3, 3});
  down(2, 1) = 1;
  CHECK(translate(w, 0, 1) == down);
  SeededRng rng(4);
  CHECK(translate(gaussian_fill({3, 3}, rng), 3, 0) == Tensor({3, 3}));
}

TEST_CASE("translate shifts channels rigidly") {
  SeededRng rng(5);
  const Tensor w = gaussian_fill({3, 4, 4}, rng);
  const Tensor t = translate(w, -1, 2);
  for (std::size_t c = 0; c < 3; ++c) {
    const Tensor tc = translate(w.slice(c), -1, 2);
    for (std::size_t i = 0; i < 16; ++i) CHECK(t[c * 16 + i] == tc[i]);
  }
}

TEST_CASE("tensor properties over random cases") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SeededRng rng(seed);
    const Tensor a = gaussian_fill({2, 4, 5}, rng), b = gaussian_fill({2, 4, 5}, rng);
    CHECK(std::abs(flat_inner(a, b)) <= l2_norm(a) * l2_norm(b) + 1e-12);
    const long x = rng.uniform_int(-4, 4), y = rng.uniform_int(-4, 4);
    CHECK(flat_inner(a, translate(b, x, y)) ==
          doctest::Approx(flat_inner(translate(a, -x, -y), b)).epsilon(1e-12));
    const Tensor back = translate(translate(a, x, y), -x, -y);
    for (std::size_t c = 0; c < 2; ++c) {
      for (long i = 0; i < 4; ++i) {
        for (long j = 0; j < 5; ++j) {
          // A cell survives both shifts when its shifted position stays inside.
          const bool inside = i + y >= 0 && i + y < 4 && j + x >= 0 && j + x < 5;
          CHECK(back(c, i, j) == (inside ? a(c, i, j) : 0.0));
        }
      }
    }
  }
}

TEST_CASE("DTNS round trip and byte layout") {
  const TensorF t({2, 3}, {1, 2, 3, 4, 5, 6});
  const std::string bytes = dtns::encode(t);
  REQUIRE(bytes.size() == 4 + 3 + 2 * 4 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "DTNS");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 1);
  CHECK(bytes[6] == 2);
  CHECK(static_cast<unsigned char>(bytes[7]) == 2);
  CHECK(bytes[8] == 0);
  CHECK(static_cast<unsigned char>(bytes[11]) == 3);
  // 1.0f little-endian
  CHECK(static_cast<unsigned char>(bytes[15]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[17]) == 0x80);
  CHECK(static_cast<unsigned char>(bytes[18]) == 0x3f);
  CHECK(dtns::decode<float>(bytes) == t);
  CHECK(dtns::decode<double>(bytes) == t.cast<double>());
  const Tensor d({1}, {0.1});
  CHECK(dtns::decode<double>(dtns::encode(d)) == d);
  CHECK(dtns::peek_dtype(dtns::encode(d)) == dtns::DType::Float64);
}

TEST_CASE("DTNS rejects malformed input") {
  const std::string good = dtns::encode(Tensor({2}, {1, 2}));
  CHECK_THROWS_AS(dtns::decode<double>("XTNS" + good.substr(4)), FormatError);
  CHECK_THROWS_AS(dtns::decode<double>(good.substr(0, good.size() - 1)), FormatError);
  CHECK_THROWS_AS(dtns::decode<double>(good + "x"), FormatError);
  std::string v = good;
  v[4] = 2;
  CHECK_THROWS_AS(dtns::decode<double>(v), FormatError);
  v = good;
  v[5] = 3;
  CHECK_THROWS_AS(dtns::decode<double>(v), FormatError);
  v = good;
  v[6] = 0;
  CHECK_THROWS_AS(dtns::decode<double>(v), FormatError);
  CHECK_THROWS_AS(dtns::read_file<double>("/nonexistent/file.dtns"), IoError);
}
