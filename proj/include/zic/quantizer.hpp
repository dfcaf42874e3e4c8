#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "zic/core.hpp"

namespace zic {

/// Uniform scalar quantizer over [lo, hi] with 2^n_bits equal segments.
///
/// Segments are half-open, [lo + k*w, lo + (k+1)*w), except the last one
/// which also contains `hi`. Inputs outside the range are clamped first, so
/// they map to the nearest end segment. The output is always a segment
/// midpoint.
class Quantizer {
 public:
  Quantizer(int n_bits, double lo, double hi) : n_bits_(n_bits), lo_(lo), hi_(hi) {
    if (n_bits < 1 || n_bits > 52) throw ConfigError("quantizer needs 1..52 bits");
    if (!(hi > lo)) throw ConfigError("quantizer range must satisfy hi > lo");
  }

  int n_bits() const { return n_bits_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::uint64_t levels() const { return std::uint64_t{1} << n_bits_; }
  double step() const { return (hi_ - lo_) / static_cast<double>(levels()); }

  std::uint64_t segment(double value) const {
    const double v = std::clamp(value, lo_, hi_);
    const double k = std::floor((v - lo_) / step());
    if (k < 0.0) return 0;
    const auto idx = static_cast<std::uint64_t>(k);
    return std::min(idx, levels() - 1);
  }

  double midpoint(std::uint64_t k) const { return lo_ + (static_cast<double>(k) + 0.5) * step(); }

  double operator()(double value) const { return midpoint(segment(value)); }

 private:
  int n_bits_;
  double lo_;
  double hi_;
};

inline double quantize(const Quantizer& q, double value) { return q(value); }

/// Range used for the fed-back interference gain.
inline Quantizer alpha_quantizer(int n_bits) { return Quantizer(n_bits, 0.0, 3.0); }
/// Range used for the fed-back phase difference.
inline Quantizer angle_quantizer(int n_bits) { return Quantizer(n_bits, -kPi, kPi); }

}  // namespace zic
