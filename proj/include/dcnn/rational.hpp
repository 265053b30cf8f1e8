#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>

#include "dcnn/error.hpp"

namespace dcnn {

/// Exact ratio of 64-bit integers, kept in lowest terms with den > 0.
class Rational {
 public:
  Rational(std::int64_t num = 0, std::int64_t den = 1) : num_(num), den_(den) {
    if (den_ == 0) throw ParameterError("rational with zero denominator");
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    const std::int64_t g = std::gcd(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  double value() const noexcept { return static_cast<double>(num_) / den_; }
  bool is_integer() const noexcept { return den_ == 1; }

  std::string to_string() const {
    return den_ == 1 ? std::to_string(num_)
                     : std::to_string(num_) + "/" + std::to_string(den_);
  }

  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::ostream& operator<<(std::ostream& os, const Rational& r) {
    return os << r.to_string();
  }

 private:
  std::int64_t num_;
  std::int64_t den_;
};

}  // namespace dcnn
