#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace zic {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A direct (or estimated direct) channel gain is zero, so the receiver
/// cannot equalize.
class DegenerateChannel : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a NaN or infinite loss.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double theta) {
  double r = std::fmod(theta + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  r -= kPi;
  // fmod rounding can land exactly on +pi
  if (r >= kPi) r -= 2.0 * kPi;
  return r;
}

}  // namespace zic
