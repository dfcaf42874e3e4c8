#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "zic/core.hpp"

namespace zic {

using BitVector = std::vector<std::uint8_t>;

/// Bits of `label`, most significant first.
inline BitVector bits_of(std::size_t label, int n_bits) {
  BitVector bits(static_cast<std::size_t>(n_bits));
  for (int i = 0; i < n_bits; ++i) bits[static_cast<std::size_t>(i)] = (label >> (n_bits - 1 - i)) & 1U;
  return bits;
}

inline std::size_t label_of(const BitVector& bits) {
  std::size_t label = 0;
  for (auto b : bits) label = (label << 1) | (b & 1U);
  return label;
}

inline std::string bit_string(std::size_t label, int n_bits) {
  std::string s;
  for (auto b : bits_of(label, n_bits)) s.push_back(b ? '1' : '0');
  return s;
}

inline int bit_errors(std::size_t a, std::size_t b) { return std::popcount(static_cast<std::uint64_t>(a ^ b)); }

/// points[label] is the symbol sent for the bit pattern `label`.
struct Constellation {
  std::vector<Complex> points;
  int n_bits = 0;
  double avg_power = 0.0;

  std::size_t size() const { return points.size(); }
};

inline double mean_power(const std::vector<Complex>& points) {
  double acc = 0.0;
  for (const auto& p : points) acc += std::norm(p);
  return points.empty() ? 0.0 : acc / static_cast<double>(points.size());
}

inline Constellation make_constellation(std::vector<Complex> points, int n_bits) {
  if (points.size() != (std::size_t{1} << n_bits)) throw ShapeError("constellation size must be 2^n_bits");
  Constellation c;
  c.avg_power = mean_power(points);
  c.points = std::move(points);
  c.n_bits = n_bits;
  return c;
}

namespace detail {

inline std::size_t gray_to_binary(std::size_t g) {
  std::size_t b = g;
  for (std::size_t shift = 1; shift < 64; shift <<= 1) b ^= b >> shift;
  return b;
}

}  // namespace detail

/// Rectangular Gray-mapped QAM with mean symbol power `power`.
///
/// The leading ceil(n/2) bits select the in-phase level and the remaining
/// bits the quadrature level; each axis is Gray coded, so grid neighbours
/// differ in exactly one bit. n_bits=2 gives QPSK, n_bits=3 a 4x2 grid.
inline Constellation standard_qam(int n_bits, double power) {
  if (n_bits < 1 || n_bits > 16) throw ConfigError("QAM needs 1..16 bits per symbol");
  if (!(power > 0.0)) throw ConfigError("QAM power must be > 0");
  const int bits_i = (n_bits + 1) / 2;
  const int bits_q = n_bits / 2;
  const std::size_t levels_i = std::size_t{1} << bits_i;
  const std::size_t levels_q = std::size_t{1} << bits_q;
  auto amplitude = [](std::size_t level, std::size_t levels) {
    return 2.0 * static_cast<double>(level) - static_cast<double>(levels - 1);
  };
  std::vector<Complex> pts(std::size_t{1} << n_bits);
  for (std::size_t label = 0; label < pts.size(); ++label) {
    const std::size_t gi = label >> bits_q;
    const std::size_t gq = label & (levels_q - 1);
    const double re = amplitude(detail::gray_to_binary(gi), levels_i);
    const double im = levels_q == 1 ? 0.0 : amplitude(detail::gray_to_binary(gq), levels_q);
    pts[label] = Complex(re, im);
  }
  const double scale = std::sqrt(power / mean_power(pts));
  for (auto& p : pts) p *= scale;
  return make_constellation(std::move(pts), n_bits);
}

inline Constellation rotate(const Constellation& c, double theta) {
  Constellation out = c;
  const Complex r = std::polar(1.0, theta);
  for (auto& p : out.points) p *= r;
  out.avg_power = mean_power(out.points);
  return out;
}

/// Minimum distance between composite points p1 + h21*p2 whose Tx1 labels
/// differ. Pairs sharing a Tx1 label never cause a Tx1 decision error.
inline double composite_min_distance(const Constellation& c1, const Constellation& c2, Complex h21) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t m1 = c1.size();
  const std::size_t m2 = c2.size();
  std::vector<Complex> comp(m1 * m2);
  for (std::size_t a = 0; a < m1; ++a)
    for (std::size_t b = 0; b < m2; ++b) comp[a * m2 + b] = c1.points[a] + h21 * c2.points[b];
  for (std::size_t i = 0; i < comp.size(); ++i) {
    for (std::size_t j = i + 1; j < comp.size(); ++j) {
      if (i / m2 == j / m2) continue;
      best = std::min(best, std::abs(comp[i] - comp[j]));
    }
  }
  return best;
}

/// Exhaustive search for the Tx2 rotation maximizing the composite minimum
/// distance at Rx1, over the grid k * span / grid_steps. Ties keep the
/// smallest angle.
inline double best_rotation(const Constellation& c1, const Constellation& c2, double sqrt_alpha, int grid_steps,
                            double span = kPi / 2.0) {
  if (grid_steps < 2) throw ConfigError("rotation search needs at least 2 grid steps");
  double best_theta = 0.0;
  double best_obj = -1.0;
  for (int k = 0; k < grid_steps; ++k) {
    const double theta = span * static_cast<double>(k) / static_cast<double>(grid_steps);
    const double obj = composite_min_distance(c1, c2, sqrt_alpha * std::polar(1.0, theta));
    if (obj > best_obj) {
      best_obj = obj;
      best_theta = theta;
    }
  }
  return best_theta;
}

/// Joint minimum-distance detector for Rx1 with the composite table cached.
/// Composite index is i1 * |c2| + i2; the lowest index wins ties.
class JointDetector {
 public:
  JointDetector(const Constellation& c1, const Constellation& c2, Complex hbar21, Complex hbar11 = {1.0, 0.0})
      : m2_(c2.size()) {
    if (c1.size() == 0 || c2.size() == 0) throw ShapeError("empty constellation");
    composite_.reserve(c1.size() * c2.size());
    for (const auto& p1 : c1.points)
      for (const auto& p2 : c2.points) composite_.push_back(hbar11 * p1 + hbar21 * p2);
  }

  std::size_t composite_index(Complex y) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < composite_.size(); ++k) {
      const double d = std::norm(y - composite_[k]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  }

  std::size_t operator()(Complex y) const { return composite_index(y) / m2_; }

  const std::vector<Complex>& composite() const { return composite_; }

 private:
  std::size_t m2_;
  std::vector<Complex> composite_;
};

/// Nearest-neighbour detector against gain * c2, lowest index on ties.
class PointDetector {
 public:
  explicit PointDetector(const Constellation& c, Complex gain = {1.0, 0.0}) {
    if (c.size() == 0) throw ShapeError("empty constellation");
    for (const auto& p : c.points) points_.push_back(gain * p);
  }

  std::size_t operator()(Complex y) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const double d = std::norm(y - points_[k]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  }

 private:
  std::vector<Complex> points_;
};

inline BitVector detect_rx1(Complex y, const Constellation& c1, const Constellation& c2, Complex hbar21,
                            Complex hbar11 = {1.0, 0.0}) {
  return bits_of(JointDetector(c1, c2, hbar21, hbar11)(y), c1.n_bits);
}

inline BitVector detect_rx2(Complex y, const Constellation& c2, Complex hbar22 = {1.0, 0.0}) {
  return bits_of(PointDetector(c2, hbar22)(y), c2.n_bits);
}

/// CSV rows "bits,re,im" for every point, in label order.
inline void write_constellation_rows(std::ostream& os, const Constellation& c, const std::string& prefix = {}) {
  char buf[128];
  for (std::size_t k = 0; k < c.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n", bit_string(k, c.n_bits).c_str(), c.points[k].real(),
                  c.points[k].imag());
    os << prefix << buf;
  }
}

}  // namespace zic
