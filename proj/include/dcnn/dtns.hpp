#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dcnn/tensor.hpp"

namespace dcnn {

/// Binary tensor container:
///   "DTNS" | version u8 (=1) | dtype u8 (1=f32, 2=f64) | ndim u8 |
///   ndim x u32 LE extents | row-major LE payload
/// No alignment padding.
namespace dtns {

enum class DType : std::uint8_t { Float32 = 1, Float64 = 2 };

inline constexpr std::uint8_t kVersion = 1;

template <typename Real>
constexpr DType dtype_of() {
  return sizeof(Real) == 4 ? DType::Float32 : DType::Float64;
}

template <typename Real>
std::string encode(const BasicTensor<Real>& t);

/// Decodes either dtype and converts to `Real`. Throws FormatError.
template <typename Real>
BasicTensor<Real> decode(std::string_view bytes);

/// Reads only the header.
DType peek_dtype(std::string_view bytes);

template <typename Real>
void write_file(const std::filesystem::path& path, const BasicTensor<Real>& t);

/// Throws IoError (missing/unreadable) or FormatError; messages name the file.
template <typename Real>
BasicTensor<Real> read_file(const std::filesystem::path& path);

std::string read_bytes(const std::filesystem::path& path);

}  // namespace dtns
}  // namespace dcnn
