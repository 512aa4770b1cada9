#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <sstream>
#include <string>

#include "microdyn/codegen.hpp"
#include "microdyn/parser.hpp"
#include "microdyn/semant.hpp"
#include "test_util.hpp"

namespace testutil {

inline std::string squeeze(std::string_view text) {
  std::string out;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  return out;
}

struct GoldenResult {
  bool ok = true;
  std::string detail;
};

/// Compiles `<name>.py` under its `# dispatch:`/`# hint:`/`# function:` header
/// and checks each line of `<name>.expected` against the output modulo whitespace.
/// With `# function:` the expected text must equal that function's definition;
/// otherwise every expected line must occur somewhere in the emitted units.
inline GoldenResult checkGolden(const std::string& name) {
  using namespace microdyn;
  const auto dir = sourceDir() / "tests" / "golden";
  const std::string source = readFile(dir / (name + ".py"));
  AnalysisOptions options;
  std::string function;
  std::istringstream header(source);
  for (std::string line; std::getline(header, line) && line.rfind("# ", 0) == 0;) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = line.substr(2, colon - 2);
    std::string value = line.substr(colon + 1);
    value.erase(0, value.find_first_not_of(' '));
    if (key == "dispatch") {
      options.policy = parseDispatchPolicy(value).value();
    } else if (key == "hint") {
      const auto eq = value.find('=');
      const std::string kind = value.substr(eq + 1);
      for (Kind k : {Kind::Int, Kind::Real, Kind::Complex, Kind::Vector, Kind::Proc, Kind::Str})
        if (kindName(k) == kind) options.kindHints[value.substr(0, eq)] = k;
    } else if (key == "function") {
      function = value;
    }
  }

  GoldenResult result;
  try {
    ProgramAnalysis analysis = analyze(parseSource(SourceProgram(name + ".py", source)), options);
    std::string emitted;
    if (!function.empty()) {
      emitted = emitFunction(analysis.functionNamed(function)->index, analysis);
    } else {
      for (const auto& unit : emitProgram(analysis).units) emitted += unit.body;
    }
    const std::string haystack = squeeze(emitted);
    std::istringstream expected(readFile(dir / (name + ".expected")));
    for (std::string line; std::getline(expected, line);) {
      const std::string needle = squeeze(line);
      if (needle.empty()) continue;
      const bool found = function.empty() ? haystack.find(needle) != std::string::npos : haystack == needle;
      if (!found) {
        result.ok = false;
        result.detail += "missing: " + line + "\n";
      }
    }
    if (!result.ok) result.detail += "emitted:\n" + emitted;
  } catch (const std::exception& e) {
    result.ok = false;
    result.detail = e.what();
  }
  return result;
}

}  // namespace testutil
