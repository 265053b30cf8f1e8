#include "dcnn/dtns.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dcnn::dtns {
namespace {

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(std::string_view bytes, std::size_t pos) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  return v;
}

struct Header {
  DType dtype;
  Shape shape;
  std::size_t payload_offset;
};

Header parse_header(std::string_view bytes) {
  if (bytes.size() < 7 || bytes.substr(0, 4) != "DTNS") {
    throw FormatError("DTNS: bad magic");
  }
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kVersion) {
    throw FormatError("DTNS: unsupported version " + std::to_string(version));
  }
  const auto code = static_cast<std::uint8_t>(bytes[5]);
  if (code != 1 && code != 2) {
    throw FormatError("DTNS: unknown dtype code " + std::to_string(code));
  }
  const std::size_t ndim = static_cast<std::uint8_t>(bytes[6]);
  if (ndim == 0) throw FormatError("DTNS: ndim is zero");
  if (bytes.size() < 7 + 4 * ndim) throw FormatError("DTNS: truncated header");
  Shape shape(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = get_le<std::uint32_t>(bytes, 7 + 4 * i);
    if (shape[i] == 0) throw FormatError("DTNS: zero extent");
  }
  return {static_cast<DType>(code), shape, 7 + 4 * ndim};
}

}  // namespace

DType peek_dtype(std::string_view bytes) { return parse_header(bytes).dtype; }

template <typename Real>
std::string encode(const BasicTensor<Real>& t) {
  if (t.ndim() > 255) throw ShapeError("DTNS: too many dimensions");
  std::string out = "DTNS";
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(dtype_of<Real>()));
  out.push_back(static_cast<char>(t.ndim()));
  for (auto e : t.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  out.reserve(out.size() + t.size() * sizeof(Real));
  for (Real v : t.data()) {
    if constexpr (sizeof(Real) == 4) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    } else {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

template <typename Real>
BasicTensor<Real> decode(std::string_view bytes) {
  const Header h = parse_header(bytes);
  const std::size_t count = shape_size(h.shape);
  const std::size_t width = h.dtype == DType::Float32 ? 4 : 8;
  if (bytes.size() != h.payload_offset + count * width) {
    throw FormatError("DTNS: payload size " +
                      std::to_string(bytes.size() - h.payload_offset) +
                      " does not match shape " + shape_to_string(h.shape));
  }
  std::vector<Real> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t pos = h.payload_offset + i * width;
    if (h.dtype == DType::Float32) {
      data[i] = static_cast<Real>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos)));
    } else {
      data[i] = static_cast<Real>(std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos)));
    }
  }
  return BasicTensor<Real>(h.shape, std::move(data));
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

template <typename Real>
void write_file(const std::filesystem::path& path, const BasicTensor<Real>& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string bytes = encode(t);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

template <typename Real>
BasicTensor<Real> read_file(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  try {
    return decode<Real>(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

template std::string encode(const BasicTensor<float>&);
template std::string encode(const BasicTensor<double>&);
template BasicTensor<float> decode<float>(std::string_view);
template BasicTensor<double> decode<double>(std::string_view);
template void write_file(const std::filesystem::path&, const BasicTensor<float>&);
template void write_file(const std::filesystem::path&, const BasicTensor<double>&);
template BasicTensor<float> read_file<float>(const std::filesystem::path&);
template BasicTensor<double> read_file<double>(const std::filesystem::path&);

}  // namespace dcnn::dtns
