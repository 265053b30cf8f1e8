#include <doctest.h>

#include <filesystem>

#include "dcnn/arch.hpp"

using namespace dcnn;
using namespace dcnn::arch;

namespace {

std::string cifar_stack(const std::string& token) {
  std::string s = "input: 3,32,32\n";
  for (int i = 0; i < 4; ++i) s += token + "\n" + token + "\nP-2\n";
  return s + "GAP\nSOFTMAX-10\n";
}

ParseError parse_error(const std::string& text) {
  try {
    parse_layer_token(text, 1);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a parse error for " << text);
  return ParseError("", 0, 0);
}

}  // namespace

TEST_CASE("token examples") {
  const auto dc = std::get<DoubleConv>(parse_layer_token("DC-128-4-3-2"));
  CHECK(dc.channels == 128);
  CHECK(dc.meta_size == 4);
  CHECK(dc.effective_size == 3);
  CHECK(dc.pool_size == 2);
  CHECK(std::get<Pool>(parse_layer_token("P-2")).size == 2);
  CHECK(render_token(dc) == "DC-128-4-3-2");
  CHECK(render_token(parse_layer_token("  mc-512-3-4\t")) == "MC-512-3-4");
  CHECK(render_token(parse_layer_token("gap")) == "GAP");
  CHECK(render_token(parse_layer_token("Softmax-10")) == "SOFTMAX-10");
}

TEST_CASE("malformed tokens carry positions") {
  auto e = parse_error("DC-128-3-4-2");
  CHECK(e.line() == 1);
  CHECK(e.column() == 8);
  CHECK(e.reason().find("smaller") != std::string::npos);
  e = parse_error("DC-128-5-3-2");
  CHECK(e.column() == 12);
  e = parse_error("Q-3");
  CHECK(e.column() == 1);
  e = parse_error("C-128");
  CHECK(e.column() == 6);
  e = parse_error("C-128-3-3");
  CHECK(e.column() == 9);
  e = parse_error("C-1x8-3");
  CHECK(e.column() == 3);
  e = parse_error("  P-0");
  CHECK(e.column() == 5);
  e = parse_error("MC-10-3-4");
  CHECK(e.reason().find("divisible") != std::string::npos);
  CHECK(std::string(e.what()).find("line 1") != std::string::npos);
}

TEST_CASE("CIFAR stacks shape-walk") {
  const ArchSpec cnn = parse_config(cifar_stack("C-128-3"));
  CHECK(cnn.layers[cnn.layers.size() - 3].output_shape == Shape{128, 2, 2});
  CHECK(cnn.layers.back().output_shape == Shape{10});
  const ArchSpec dcnn = parse_config(cifar_stack("DC-128-4-3-2"));
  for (auto c : dcnn.layer_sizes()) CHECK(c == 128);
  const ArchSpec mc = parse_config(cifar_stack("MC-512-3-4"));
  for (auto c : mc.layer_sizes()) CHECK(c == 128);
  CHECK(relative_params(dcnn, cnn) == Rational(16, 9));
  CHECK(relative_params(mc, cnn) == Rational(4));
  CHECK(relative_params(parse_config(cifar_stack("DC-32-6-3-2")), cnn) == Rational(1));
  CHECK(relative_params(parse_config(cifar_stack("DC-4-10-3-1")), cnn).value() ==
        doctest::Approx(0.69).epsilon(0.005 / 0.69));
}

TEST_CASE("parameter accounting") {
  const ArchSpec s =
      parse_config("input: 3,8,8\nC-4-3\nDC-2-4-3-1\nMC-8-3-2\nP-2\nGAP\nSOFTMAX-5\n");
  CHECK(s.layers[0].filter_params == 3 * 4 * 9);
  CHECK(s.layers[0].params == 3 * 4 * 9 + 2 * 4);
  CHECK(s.layers[1].output_shape == Shape{8, 8, 8});
  CHECK(s.layers[1].filter_params == 4 * 2 * 16);
  CHECK(s.layers[1].params == 4 * 2 * 16 + 2 * 8);
  CHECK(s.layers[2].output_shape == Shape{4, 8, 8});
  CHECK(s.layers[2].filter_params == 8 * 8 * 9);
  CHECK(s.layers[5].params == 4 * 5 + 5);
  CHECK(s.filter_params() == 108 + 128 + 576);
  CHECK(s.layer_sizes() == std::vector<std::size_t>{4, 8, 4});
}

TEST_CASE("network-level errors") {
  CHECK_THROWS_AS(parse_config("input: 3,8,8\n"), ParseError);
  CHECK_THROWS_AS(parse_network({}, {3, 8, 8}), ParseError);
  try {
    parse_config("input: 3,32,32\nC-8-3\nP-3\nGAP\nSOFTMAX-2\n");
    FAIL("expected error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_config("input: 3,8,8\nC-8-3\nSOFTMAX-2\n"), ParseError);
  CHECK_THROWS_AS(parse_config("input: 3,8,8\nC-8-3\nGAP\n"), ParseError);
  CHECK_THROWS_AS(parse_config("input: 3,8,8\nGAP\nSOFTMAX-2\nGAP\nSOFTMAX-2\n"), ParseError);
  CHECK_THROWS_AS(parse_config("input: 3,8,8\nC-8-2\nGAP\nSOFTMAX-2\n"), ParseError);
  CHECK_THROWS_AS(parse_config("C-8-3\nGAP\nSOFTMAX-2\n"), ParseError);
  CHECK_THROWS_AS(relative_params(parse_config("input: 3,8,8\nGAP\nSOFTMAX-2\n"),
                                  parse_config("input: 3,8,8\nGAP\nSOFTMAX-2\n")),
                  DegenerateError);
}

TEST_CASE("render and parse round-trip") {
  const ArchSpec s = parse_config("# comment\n\ninput: 3,32,32\n  dc-16-6-3-1 \nP-2\nGAP\nsoftmax-10\n");
  CHECK(render(s) == std::vector<std::string>{"DC-16-6-3-1", "P-2", "GAP", "SOFTMAX-10"});
  CHECK(parse_config(render_config(s)) == s);
  CHECK(parse_network(render(s), s.input_shape) == s);
}

TEST_CASE("shipped configs") {
  const std::filesystem::path dir = DCNN_CONFIG_DIR;
  const ArchSpec cnn = load_config(dir / "cnn.cfg");
  CHECK(cnn == parse_config(cifar_stack("C-128-3")));
  CHECK(load_config(dir / "dcnn.cfg") == parse_config(cifar_stack("DC-128-4-3-2")));
  CHECK(load_config(dir / "maxout_cnn.cfg") == parse_config(cifar_stack("MC-512-3-4")));
  CHECK(load_config(dir / "dcnn_16_6_3_1.cfg").layer_sizes()[0] == 256);
  CHECK(load_config(dir / "toy_maxout_dcnn.cfg").filter_params() == 1152);
  CHECK(load_config(dir / "toy_cnn_matched.cfg").filter_params() == 1188);
  CHECK_THROWS_AS(load_config(dir / "missing.cfg"), IoError);
  const std::string table = inspect_table(load_config(dir / "dcnn.cfg"), &cnn);
  CHECK(table.find("16/9") != std::string::npos);
}
