#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "microdyn/semant.hpp"

namespace microdyn {

/// A runtime failure, named like the compiled runtime's `error: <Name>` line.
class InterpError : public std::runtime_error {
 public:
  explicit InterpError(std::string name) : std::runtime_error(name), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

struct InterpOptions {
  /// Nested user calls before FrameOverflow.
  int maxCallDepth = 2000;
  /// Statements executed before StepLimit; 0 means unlimited.
  std::uint64_t maxSteps = 0;
};

struct InterpMark {
  std::string label;
  double seconds = 0;  // steady clock, relative to interpretation start
};

struct InterpResult {
  std::string output;
  /// Function names in the order the compiled kernel would request them.
  std::vector<std::string> loadTrace;
  /// Observed kinds keyed like ProgramAnalysis::kindTable, Int widened to
  /// Real when both were stored.
  std::map<std::pair<std::string, std::string>, Kind> kindTrace;
  std::vector<InterpMark> marks;
  /// Error name when execution stopped early; output holds what came before.
  std::optional<std::string> error;

  /// Seconds between two marks, if both were reached.
  std::optional<double> markInterval(const std::string& from, const std::string& to) const;
};

/// Tree-walking execution with one name-keyed map per activation. Values are
/// coerced to their slot kinds on store, the same points where compiled code
/// converts.
InterpResult interpret(const ProgramAnalysis& analysis, const InterpOptions& options = {});

/// Parse, analyze with `policy`, interpret.
InterpResult interpretSource(const std::string& name, const std::string& text,
                             DispatchPolicy policy = DispatchPolicy::Auto, const InterpOptions& options = {});

}  // namespace microdyn
