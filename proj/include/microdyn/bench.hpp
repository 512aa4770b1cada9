#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "microdyn/host.hpp"

namespace microdyn {

/// Interquartile range above the allowed fraction of the median.
class VarianceError : public std::runtime_error {
 public:
  VarianceError(std::string variant, double median, double iqr);
  const std::string& variant() const noexcept { return variant_; }

 private:
  std::string variant_;
};

/// A variant failed to run or disagreed with the others.
class BenchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& benchVariantNames() {
  static const std::vector<std::string> names{"refinterp", "static", "dynamic", "load", "native"};
  return names;
}

struct BenchmarkSpec {
  std::filesystem::path program;
  std::filesystem::path nativeReference;
  std::int64_t nx = 100;
  std::int64_t maxIters = 10000;
  int repetitions = 7;
  std::vector<std::string> variants = benchVariantNames();

  /// Reads the JSON spec; relative paths resolve against its directory.
  /// Throws BenchError on unknown variants, NX < 1 or repetitions < 5.
  static BenchmarkSpec load(const std::filesystem::path& file);
};

struct BenchOptions {
  std::filesystem::path workDir;
  ToolchainProfile profile = ToolchainProfile::fromEnvironment();
  /// Allowed IQR / median; non-positive disables the check.
  double varianceLimit = 0.2;
  /// Measurements of a noisy variant before VarianceError.
  int attempts = 2;
  /// Repetitions for the interpreter, which is orders of magnitude slower.
  std::optional<int> interpRepetitions;
  double residualTolerance = 1e-9;
};

struct VariantResult {
  std::string variant;
  std::vector<double> samples;
  double median = 0;
  double iqr = 0;
  std::uint64_t residentBytes = 0;
  std::uint64_t dynamicBytes = 0;
  std::uint64_t totalBytes = 0;
  double residual = 0;
  std::string output;
};

struct BenchResult {
  std::vector<VariantResult> variants;

  const VariantResult* find(const std::string& variant) const;
  /// Header `variant,median_s,iqr_s,resident_bytes,dynamic_bytes,total_bytes,residual`.
  std::string csv() const;
  /// Aligned columns plus each variant's time relative to native (or static).
  std::string table() const;
};

/// VarianceError when the IQR exceeds `limit` times the median; a
/// non-positive limit accepts everything.
void checkVariance(const VariantResult& result, double limit);

/// Rewrites top-level `NAME = <int>` lines; other lines are untouched.
std::string substituteParameters(const std::string& source, const std::map<std::string, std::int64_t>& values);

/// Builds and measures every variant in order, checks residual agreement and
/// writes results.csv and results.txt into the work directory.
BenchResult runSuite(const BenchmarkSpec& spec, const BenchOptions& options);

}  // namespace microdyn
