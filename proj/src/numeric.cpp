#include "microdyn/numeric.hpp"

#include <charconv>
#include <cmath>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace microdyn {

std::string formatReal(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value < 0 ? "-inf" : "inf";
  char sci[64];
  auto res = std::to_chars(sci, sci + sizeof sci, value, std::chars_format::scientific);
  std::string text(sci, res.ptr);
  std::string out;
  std::size_t p = 0;
  if (text[p] == '-') {
    out += '-';
    ++p;
  }
  std::string digits;
  for (; p < text.size() && text[p] != 'e'; ++p)
    if (text[p] != '.') digits += text[p];
  while (digits.size() > 1 && digits.back() == '0') digits.pop_back();
  int exponent = std::atoi(text.c_str() + p + 1);
  int n = static_cast<int>(digits.size());
  if (exponent >= -4 && exponent < 16) {
    if (exponent < 0) {
      out += "0.";
      out.append(static_cast<std::size_t>(-exponent - 1), '0');
      out += digits;
    } else {
      for (int i = 0; i <= exponent; ++i) out += i < n ? digits[static_cast<std::size_t>(i)] : '0';
      out += '.';
      out += n > exponent + 1 ? digits.substr(static_cast<std::size_t>(exponent + 1)) : "0";
    }
    return out;
  }
  out += digits[0];
  if (n > 1) out += "." + digits.substr(1);
  char exp[16];
  std::snprintf(exp, sizeof exp, "e%c%02d", exponent < 0 ? '-' : '+', std::abs(exponent));
  return out + exp;
}

std::int64_t floorDiv(std::int64_t a, std::int64_t b) {
  if (b == -1) return wrapNeg(a);
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) q -= 1;
  return q;
}

std::int64_t floorMod(std::int64_t a, std::int64_t b) {
  if (b == -1) return 0;
  std::int64_t r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}

namespace {

// Quantile by linear interpolation on the sorted sample (numpy's default).
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double median(std::vector<double> samples) {
  if (samples.empty()) return 0;
  std::sort(samples.begin(), samples.end());
  return quantile(samples, 0.5);
}

double interquartileRange(std::vector<double> samples) {
  if (samples.empty()) return 0;
  std::sort(samples.begin(), samples.end());
  return quantile(samples, 0.75) - quantile(samples, 0.25);
}

}  // namespace microdyn
