#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "microdyn/host.hpp"
#include "microdyn/parser.hpp"
#include "microdyn/refinterp.hpp"
#include "test_util.hpp"

namespace testutil {

/// One program run both ways under a single dispatch policy.
struct DiffRun {
  std::string program;
  microdyn::DispatchPolicy policy = microdyn::DispatchPolicy::Auto;
  microdyn::InterpResult interp;
  microdyn::RunReport compiled;
  std::optional<std::string> compiledError;
  std::vector<std::string> compiledLoads;

  bool agrees() const { return interp.output == compiled.output && interp.error == compiledError; }
  bool loadsAgree() const { return interp.loadTrace == compiledLoads; }

  std::string describe() const {
    return program + " [" + std::to_string(static_cast<int>(policy)) + "]\n--- interp (" +
           interp.error.value_or("ok") + ")\n" + interp.output + "--- compiled (" + compiledError.value_or("ok") +
           ", status " + std::to_string(compiled.processStatus) + ")\n" + compiled.output + compiled.stderrText;
  }
};

inline std::optional<std::string> runtimeErrorName(const std::string& stderrText) {
  static const std::regex line(R"(error: (\w+))");
  std::smatch m;
  if (std::regex_search(stderrText, m, line)) return m[1].str();
  return std::nullopt;
}

inline DiffRun differential(const std::filesystem::path& file, microdyn::DispatchPolicy policy,
                            const std::filesystem::path& workDir, const std::filesystem::path& runtimeCache) {
  using namespace microdyn;
  DiffRun run;
  run.program = file.stem().string();
  run.policy = policy;
  AnalysisOptions options;
  options.policy = policy;
  ProgramAnalysis analysis = analyze(parseSource(SourceProgram(file.string(), readFile(file))), options);
  run.interp = interpret(analysis);
  BuiltKernel k = buildKernel(emitProgram(analysis, {"k"}), workDir, ToolchainProfile::fromEnvironment(), "k",
                              {runtimeCache});
  run.compiled = runKernel(k);
  run.compiledError = runtimeErrorName(run.compiled.stderrText);
  for (const auto& e : run.compiled.events)
    if (e.kind == "load") run.compiledLoads.push_back(e.name);
  return run;
}

}  // namespace testutil
