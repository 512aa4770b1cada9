#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace microdyn {

/// Shortest round-trip decimal in Python's float repr layout.
std::string formatReal(double value);

/// Python floor division and modulo on wrapping 64-bit integers (b != 0).
std::int64_t floorDiv(std::int64_t a, std::int64_t b);
std::int64_t floorMod(std::int64_t a, std::int64_t b);

/// Two's-complement wrapping arithmetic.
inline std::int64_t wrapAdd(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
inline std::int64_t wrapSub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
inline std::int64_t wrapMul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}
inline std::int64_t wrapNeg(std::int64_t a) { return static_cast<std::int64_t>(0 - static_cast<std::uint64_t>(a)); }

/// Median and interquartile range with linear interpolation between order
/// statistics; both 0 for an empty sample.
double median(std::vector<double> samples);
double interquartileRange(std::vector<double> samples);

}  // namespace microdyn
