#include "dcnn/arch.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dcnn::arch {
namespace {

struct Field {
  std::string_view text;
  std::size_t column;  // 1-based, relative to the untrimmed input
};

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::size_t parse_int(const Field& f, std::size_t line) {
  if (f.text.empty()) throw ParseError("empty field", line, f.column);
  std::size_t v = 0;
  const char* end = f.text.data() + f.text.size();
  auto [ptr, ec] = std::from_chars(f.text.data(), end, v);
  if (ec == std::errc::result_out_of_range) {
    throw ParseError("integer out of range '" + std::string(f.text) + "'", line, f.column);
  }
  if (ec != std::errc() || ptr != end ||
      !std::isdigit(static_cast<unsigned char>(f.text.front()))) {
    throw ParseError("expected a decimal integer, got '" + std::string(f.text) + "'",
                     line, f.column);
  }
  if (v == 0) throw ParseError("value must be >= 1", line, f.column);
  return v;
}

}  // namespace

LayerToken parse_layer_token(std::string_view text, std::size_t line) {
  std::size_t begin = 0, end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  if (begin == end) throw ParseError("empty token", line, 1);

  std::vector<Field> fields;
  std::size_t start = begin;
  for (std::size_t i = begin; i <= end; ++i) {
    if (i == end || text[i] == '-') {
      fields.push_back({text.substr(start, i - start), start + 1});
      start = i + 1;
    }
  }
  const std::string head = upper(fields[0].text);
  const std::size_t nargs = fields.size() - 1;

  auto arity = [&](std::size_t want) {
    if (nargs != want) {
      const std::size_t col = nargs > want ? fields[want + 1].column : end + 1;
      throw ParseError(head + " takes " + std::to_string(want) + " field(s), got " +
                           std::to_string(nargs),
                       line, col);
    }
  };
  auto arg = [&](std::size_t i) { return parse_int(fields[i], line); };

  if (head == "C") {
    arity(2);
    return Conv{arg(1), arg(2)};
  }
  if (head == "DC") {
    arity(4);
    DoubleConv t{arg(1), arg(2), arg(3), arg(4)};
    if (t.meta_size < t.effective_size) {
      throw ParseError("meta filter size " + std::to_string(t.meta_size) +
                           " is smaller than effective size " +
                           std::to_string(t.effective_size),
                       line, fields[2].column);
    }
    if ((t.meta_size - t.effective_size + 1) % t.pool_size != 0) {
      throw ParseError("z' - z + 1 = " + std::to_string(t.meta_size - t.effective_size + 1) +
                           " is not divisible by pool size " + std::to_string(t.pool_size),
                       line, fields[4].column);
    }
    return t;
  }
  if (head == "MC") {
    arity(3);
    MaxoutConv t{arg(1), arg(2), arg(3)};
    if (t.channels % t.stride != 0) {
      throw ParseError("channel count " + std::to_string(t.channels) +
                           " not divisible by feature-pooling stride " +
                           std::to_string(t.stride),
                       line, fields[3].column);
    }
    return t;
  }
  if (head == "P") {
    arity(1);
    return Pool{arg(1)};
  }
  if (head == "GAP") {
    arity(0);
    return GlobalAvgPool{};
  }
  if (head == "SOFTMAX") {
    arity(1);
    return Softmax{arg(1)};
  }
  throw ParseError("unknown layer type '" + std::string(fields[0].text) + "'", line,
                   fields[0].column);
}

std::string render_token(const LayerToken& token) {
  auto s = [](std::size_t v) { return std::to_string(v); };
  return std::visit(
      [&](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Conv>) {
          return "C-" + s(t.channels) + "-" + s(t.size);
        } else if constexpr (std::is_same_v<T, DoubleConv>) {
          return "DC-" + s(t.channels) + "-" + s(t.meta_size) + "-" +
                 s(t.effective_size) + "-" + s(t.pool_size);
        } else if constexpr (std::is_same_v<T, MaxoutConv>) {
          return "MC-" + s(t.channels) + "-" + s(t.size) + "-" + s(t.stride);
        } else if constexpr (std::is_same_v<T, Pool>) {
          return "P-" + s(t.size);
        } else if constexpr (std::is_same_v<T, GlobalAvgPool>) {
          return "GAP";
        } else {
          return "SOFTMAX-" + s(t.classes);
        }
      },
      token);
}

std::vector<LayerToken> ArchSpec::tokens() const {
  std::vector<LayerToken> out;
  for (const auto& l : layers) out.push_back(l.token);
  return out;
}

std::size_t ArchSpec::total_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.params;
  return n;
}

std::size_t ArchSpec::filter_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.filter_params;
  return n;
}

std::vector<std::size_t> ArchSpec::layer_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& l : layers) {
    if (std::holds_alternative<Conv>(l.token) || std::holds_alternative<DoubleConv>(l.token) ||
        std::holds_alternative<MaxoutConv>(l.token)) {
      out.push_back(l.output_shape[0]);
    }
  }
  return out;
}

ArchSpec build(std::span<const LayerToken> tokens, const Shape& input_shape,
               std::span<const std::size_t> lines) {
  auto line_of = [&](std::size_t i) { return i < lines.size() ? lines[i] : 0; };
  auto fail = [&](std::size_t i, const std::string& why) -> ParseError {
    return ParseError("layer " + std::to_string(i + 1) + " (" + render_token(tokens[i]) +
                          "): " + why,
                      line_of(i), 1);
  };
  if (tokens.empty()) throw ParseError("network has no layers", 0, 0);
  if (input_shape.size() != 3 || shape_size(input_shape) == 0 ||
      std::count(input_shape.begin(), input_shape.end(), 0u) > 0) {
    throw ParseError("input shape must be c,h,w with positive extents, got " +
                         shape_to_string(input_shape),
                     0, 0);
  }

  ArchSpec spec;
  spec.input_shape = input_shape;
  Shape shape = input_shape;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    LayerInfo info{tokens[i], {}, 0, 0, line_of(i)};
    const bool spatial = shape.size() == 3;
    auto need_spatial = [&] {
      if (!spatial) throw fail(i, "needs a [c,h,w] input, got " + shape_to_string(shape));
    };
    auto need_odd = [&](std::size_t z) {
      if (z % 2 == 0) {
        throw fail(i, "same padding needs an odd filter size, got " + std::to_string(z));
      }
    };

    std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, Conv>) {
            need_spatial();
            need_odd(t.size);
            info.filter_params = shape[0] * t.channels * t.size * t.size;
            info.params = info.filter_params + 2 * t.channels;
            shape = {t.channels, shape[1], shape[2]};
          } else if constexpr (std::is_same_v<T, DoubleConv>) {
            need_spatial();
            try {
              t.spec().validate();
            } catch (const SpecError& e) {
              throw fail(i, e.what());
            }
            need_odd(t.effective_size);
            const std::size_t out_c = t.spec().output_channels();
            info.filter_params = shape[0] * t.channels * t.meta_size * t.meta_size;
            info.params = info.filter_params + 2 * out_c;
            shape = {out_c, shape[1], shape[2]};
          } else if constexpr (std::is_same_v<T, MaxoutConv>) {
            need_spatial();
            need_odd(t.size);
            if (t.stride == 0 || t.channels % t.stride != 0) {
              throw fail(i, "channel count not divisible by feature-pooling stride");
            }
            info.filter_params = shape[0] * t.channels * t.size * t.size;
            info.params = info.filter_params + 2 * t.channels;
            shape = {t.channels / t.stride, shape[1], shape[2]};
          } else if constexpr (std::is_same_v<T, Pool>) {
            need_spatial();
            if (shape[1] % t.size != 0 || shape[2] % t.size != 0) {
              throw fail(i, "spatial size " + std::to_string(shape[1]) + "x" +
                                std::to_string(shape[2]) + " not divisible by " +
                                std::to_string(t.size));
            }
            shape = {shape[0], shape[1] / t.size, shape[2] / t.size};
          } else if constexpr (std::is_same_v<T, GlobalAvgPool>) {
            need_spatial();
            shape = {shape[0]};
          } else {
            if (i + 1 != tokens.size()) throw fail(i, "SOFTMAX must be the last layer");
            if (i == 0 || !std::holds_alternative<GlobalAvgPool>(tokens[i - 1])) {
              throw fail(i, "SOFTMAX must follow GAP");
            }
            info.params = shape[0] * t.classes + t.classes;
            shape = {t.classes};
          }
        },
        tokens[i]);
    info.output_shape = shape;
    spec.layers.push_back(std::move(info));
  }
  if (!std::holds_alternative<Softmax>(tokens.back())) {
    throw ParseError("network must end with GAP followed by SOFTMAX-n", line_of(tokens.size() - 1),
                     1);
  }
  return spec;
}

namespace {

std::string_view strip_comment_and_trim(std::string_view s) {
  if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

ArchSpec parse_lines(const std::vector<std::pair<std::string, std::size_t>>& entries,
                     const Shape& input_shape) {
  std::vector<LayerToken> tokens;
  std::vector<std::size_t> lines;
  for (const auto& [text, line] : entries) {
    tokens.push_back(parse_layer_token(text, line));
    lines.push_back(line);
  }
  if (tokens.empty()) throw ParseError("network has no layers", 0, 0);
  return build(tokens, input_shape, lines);
}

}  // namespace

ArchSpec parse_network(std::span<const std::string> lines, const Shape& input_shape) {
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    // Keep the untrimmed text so error columns refer to the caller's line.
    if (strip_comment_and_trim(lines[i]).empty()) continue;
    std::string_view raw = lines[i];
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    entries.emplace_back(std::string(raw), i + 1);
  }
  return parse_lines(entries, input_shape);
}

ArchSpec parse_config(std::string_view text, std::optional<Shape> default_input) {
  std::optional<Shape> input = std::move(default_input);
  std::vector<std::pair<std::string, std::size_t>> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    ++line_no;
    pos = nl + 1;
    std::string_view body = strip_comment_and_trim(raw);
    if (body.empty()) continue;

    const std::string lowered = [&] {
      std::string s(body.substr(0, std::min<std::size_t>(6, body.size())));
      for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      return s;
    }();
    if (lowered == "input:") {
      if (!entries.empty()) throw ParseError("input directive must precede layers", line_no, 1);
      Shape shape;
      std::string_view rest = body.substr(6);
      const std::size_t base = static_cast<std::size_t>(body.data() - raw.data()) + 7;
      std::size_t off = 0;
      while (true) {
        std::size_t comma = rest.find(',', off);
        std::string_view part = rest.substr(off, comma == std::string_view::npos
                                                     ? std::string_view::npos
                                                     : comma - off);
        std::size_t lead = 0;
        while (lead < part.size() && is_space(part[lead])) ++lead;
        std::string_view num = part.substr(lead);
        while (!num.empty() && is_space(num.back())) num.remove_suffix(1);
        shape.push_back(parse_int({num, base + off + lead}, line_no));
        if (comma == std::string_view::npos) break;
        off = comma + 1;
      }
      if (shape.size() != 3) throw ParseError("input directive needs c,h,w", line_no, base);
      input = shape;
      continue;
    }
    std::string_view tok = raw;
    if (auto hash = tok.find('#'); hash != std::string_view::npos) tok = tok.substr(0, hash);
    entries.emplace_back(std::string(tok), line_no);
    if (nl == text.size()) break;
  }
  if (!input) throw ParseError("missing 'input: c,h,w' directive", 0, 0);
  return parse_lines(entries, *input);
}

ArchSpec load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.reason(), e.line(), e.column());
  }
}

std::vector<std::string> render(const ArchSpec& spec) {
  std::vector<std::string> out;
  for (const auto& l : spec.layers) out.push_back(render_token(l.token));
  return out;
}

std::string render_config(const ArchSpec& spec) {
  std::string out = "input: " + std::to_string(spec.input_shape[0]) + "," +
                    std::to_string(spec.input_shape[1]) + "," +
                    std::to_string(spec.input_shape[2]) + "\n";
  for (const auto& t : render(spec)) out += t + "\n";
  return out;
}

Rational relative_params(const ArchSpec& a, const ArchSpec& reference) {
  const std::size_t ref = reference.filter_params();
  if (ref == 0) throw DegenerateError("reference architecture has no filter parameters");
  return Rational(static_cast<std::int64_t>(a.filter_params()),
                  static_cast<std::int64_t>(ref));
}

std::string inspect_table(const ArchSpec& spec, const ArchSpec* reference) {
  std::ostringstream os;
  os << std::left << std::setw(6) << "#" << std::setw(18) << "token" << std::setw(18)
     << "output" << std::right << std::setw(12) << "params" << std::setw(12) << "filters"
     << "\n";
  os << std::left << std::setw(6) << "-" << std::setw(18) << "input" << std::setw(18)
     << shape_to_string(spec.input_shape) << "\n";
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    os << std::left << std::setw(6) << i + 1 << std::setw(18) << render_token(l.token)
       << std::setw(18) << shape_to_string(l.output_shape) << std::right << std::setw(12)
       << l.params << std::setw(12) << l.filter_params << "\n";
  }
  os << "total params: " << spec.total_params() << "\n";
  os << "filter params: " << spec.filter_params() << "\n";
  if (reference) {
    const Rational r = relative_params(spec, *reference);
    os << "relative filter params: " << std::fixed << std::setprecision(4) << r.value()
       << " (" << r.to_string() << ")\n";
  }
  return os.str();
}

}  // namespace dcnn::arch
