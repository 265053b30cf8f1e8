#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dcnn/double_conv.hpp"
#include "dcnn/rational.hpp"
#include "dcnn/tensor.hpp"

namespace dcnn::arch {

/// C-<c>-<z>
struct Conv {
  std::size_t channels, size;
  friend bool operator==(const Conv&, const Conv&) = default;
};
/// DC-<c>-<z'>-<z>-<s>
struct DoubleConv {
  std::size_t channels, meta_size, effective_size, pool_size;
  DoubleConvSpec spec() const {
    return {channels, meta_size, effective_size, pool_size, PoolKind::Max};
  }
  friend bool operator==(const DoubleConv&, const DoubleConv&) = default;
};
/// MC-<c>-<z>-<k>: c filters, channelwise max over groups of k.
struct MaxoutConv {
  std::size_t channels, size, stride;
  friend bool operator==(const MaxoutConv&, const MaxoutConv&) = default;
};
/// P-<s>
struct Pool {
  std::size_t size;
  friend bool operator==(const Pool&, const Pool&) = default;
};
struct GlobalAvgPool {
  friend bool operator==(const GlobalAvgPool&, const GlobalAvgPool&) = default;
};
/// SOFTMAX-<n>: linear map to n classes followed by softmax.
struct Softmax {
  std::size_t classes;
  friend bool operator==(const Softmax&, const Softmax&) = default;
};

using LayerToken = std::variant<Conv, DoubleConv, MaxoutConv, Pool, GlobalAvgPool, Softmax>;

/// Parses one token. `line` is only used to position errors.
LayerToken parse_layer_token(std::string_view text, std::size_t line = 0);

std::string render_token(const LayerToken& token);

struct LayerInfo {
  LayerToken token;
  Shape output_shape;
  /// Filters plus the batch-norm scale/shift that follows each convolution,
  /// or classifier weights and bias for SOFTMAX.
  std::size_t params = 0;
  /// Convolution filter weights only.
  std::size_t filter_params = 0;
  /// 1-based source line, 0 when built programmatically.
  std::size_t line = 0;

  /// Structural equality; source lines are not compared.
  friend bool operator==(const LayerInfo& a, const LayerInfo& b) {
    return a.token == b.token && a.output_shape == b.output_shape && a.params == b.params &&
           a.filter_params == b.filter_params;
  }
};

struct ArchSpec {
  Shape input_shape;
  std::vector<LayerInfo> layers;

  std::vector<LayerToken> tokens() const;
  std::size_t total_params() const;
  std::size_t filter_params() const;
  /// Output channel count of every convolution-like layer, in order.
  std::vector<std::size_t> layer_sizes() const;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// Runs shape inference and parameter accounting over `tokens`.
/// Convolutions use same padding; the stack must end in GAP, SOFTMAX-n.
ArchSpec build(std::span<const LayerToken> tokens, const Shape& input_shape,
               std::span<const std::size_t> lines = {});

/// One token per entry; blank entries and `#` comments are skipped.
ArchSpec parse_network(std::span<const std::string> lines, const Shape& input_shape);

/// Config file text: a leading `input: c,h,w` directive, then one token per
/// line. `default_input` is used when the directive is absent.
ArchSpec parse_config(std::string_view text,
                      std::optional<Shape> default_input = std::nullopt);
ArchSpec load_config(const std::filesystem::path& path);

std::vector<std::string> render(const ArchSpec& spec);
/// Config file text that parse_config reads back to `spec`.
std::string render_config(const ArchSpec& spec);

/// Filter-parameter count of `a` over that of `reference`.
Rational relative_params(const ArchSpec& a, const ArchSpec& reference);

/// Per-layer token / output shape / parameter table with totals, plus a ratio
/// line when `reference` is given.
std::string inspect_table(const ArchSpec& spec, const ArchSpec* reference = nullptr);

}  // namespace dcnn::arch
