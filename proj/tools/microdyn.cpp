// Command-line driver: compile, build, run, interp, bench, elf-dump.
//
// Exit status: 0 success, 1 user error (bad input, compile error, kernel
// runtime error), 2 internal error (toolchain or host failure).

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "microdyn/bench.hpp"
#include "microdyn/codegen.hpp"
#include "microdyn/elf.hpp"
#include "microdyn/error.hpp"
#include "microdyn/host.hpp"
#include "microdyn/parser.hpp"
#include "microdyn/refinterp.hpp"
#include "microdyn/semant.hpp"

namespace fs = std::filesystem;
using namespace microdyn;

namespace {

constexpr int kUserError = 1;
constexpr int kInternalError = 2;

struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CompileArgs {
  std::string file;
  std::string out;
  std::string dispatch = "auto";
  std::string maxLexLevels = "auto";
  std::vector<std::string> hints;
};

fs::path workDir(const std::string& explicitOut, const std::string& file) {
  if (!explicitOut.empty()) return explicitOut;
  const char* env = std::getenv("MICRODYN_WORKDIR");
  fs::path base = env && *env ? fs::path(env) : fs::current_path();
  return base / (fs::path(file).stem().string() + ".out");
}

Kind parseKindName(const std::string& text) {
  for (Kind k : {Kind::Int, Kind::Real, Kind::Complex, Kind::Vector, Kind::Proc, Kind::Object, Kind::Str})
    if (kindName(k) == text) return k;
  throw UserError("unknown kind '" + text + "'");
}

ProgramAnalysis analyzeFile(const CompileArgs& args) {
  AnalysisOptions options;
  auto policy = parseDispatchPolicy(args.dispatch);
  if (!policy) throw UserError("--dispatch must be static, dynamic, load or auto");
  options.policy = *policy;
  if (args.maxLexLevels != "auto") {
    try {
      std::size_t used = 0;
      int n = std::stoi(args.maxLexLevels, &used);
      if (used != args.maxLexLevels.size() || n < 1) throw std::invalid_argument("range");
      options.maxLexLevels = n;
    } catch (const std::exception&) {
      throw UserError("--max-lex-levels must be a positive integer or 'auto'");
    }
  }
  for (const auto& h : args.hints) {
    auto eq = h.find('=');
    if (eq == std::string::npos) throw UserError("--hint expects scope.var=Kind, got '" + h + "'");
    options.kindHints[h.substr(0, eq)] = parseKindName(h.substr(eq + 1));
  }
  return analyze(parseSource(SourceProgram::fromFile(args.file)), options);
}

void addCompileOptions(CLI::App* cmd, CompileArgs& args) {
  cmd->add_option("file", args.file, "MiniPy source")->required();
  cmd->add_option("--out", args.out, "Output directory (default: $MICRODYN_WORKDIR/<stem>.out)");
  cmd->add_option("--dispatch", args.dispatch, "static | dynamic | load | auto")
      ->check(CLI::IsMember({"static", "dynamic", "load", "auto"}));
  cmd->add_option("--max-lex-levels", args.maxLexLevels, "Display size, N or auto");
  cmd->add_option("--hint", args.hints, "Kind pin, e.g. f.x=Real (module scope is <module>)");
}

BuiltKernel buildFile(const CompileArgs& args, const std::string& kernelName) {
  ProgramAnalysis analysis = analyzeFile(args);
  fs::path dir = workDir(args.out, args.file);
  return buildKernel(emitProgram(analysis, {kernelName}), dir, ToolchainProfile::fromEnvironment(), kernelName,
                     {dir / ".rtcache"});
}

std::string kernelNameOf(const std::string& file) {
  std::string stem = fs::path(file).stem().string();
  std::string name;
  for (char c : stem) name += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  if (name.empty() || std::isdigit(static_cast<unsigned char>(name[0]))) name = "k" + name;
  return name;
}

int runMain(int argc, char** argv) {
  CLI::App app{"Ahead-of-time MiniPy compiler with dynamic function loading"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CompileArgs compileArgs;
  bool emitSymtab = false;
  auto* compile = app.add_subcommand("compile", "Translate a MiniPy file to C units");
  addCompileOptions(compile, compileArgs);
  compile->add_flag("--emit-symtab", emitSymtab, "Print the resolved symbol table");

  CompileArgs buildArgs;
  auto* build = app.add_subcommand("build", "Compile and link a kernel with the host toolchain");
  addCompileOptions(build, buildArgs);

  CompileArgs runArgs;
  int timeoutSeconds = 60;
  std::string eventLog;
  auto* run = app.add_subcommand("run", "Compile, build and run a kernel under the host monitor");
  addCompileOptions(run, runArgs);
  run->add_option("--timeout", timeoutSeconds, "Seconds before the kernel is killed")->check(CLI::PositiveNumber);
  run->add_option("--event-log", eventLog, "Write the JSON-lines event log here");

  std::string interpFile;
  std::string interpDispatch = "auto";
  bool showLoads = false;
  auto* interp = app.add_subcommand("interp", "Run a MiniPy file in the reference interpreter");
  interp->add_option("file", interpFile, "MiniPy source")->required();
  interp->add_option("--dispatch", interpDispatch, "Dispatch used for the load trace")
      ->check(CLI::IsMember({"static", "dynamic", "load", "auto"}));
  interp->add_flag("--loads", showLoads, "Print the load trace to stderr");

  std::string benchSpec, benchOut;
  std::optional<int> benchReps;
  double varianceLimit = 0.2;
  auto* bench = app.add_subcommand("bench", "Run the Jacobi benchmark suite");
  bench->add_option("spec", benchSpec, "Benchmark JSON spec")->required();
  bench->add_option("--out", benchOut, "Directory for builds and results");
  bench->add_option("--repetitions", benchReps, "Override the spec's repetitions (>= 5)");
  bench->add_option("--variance-limit", varianceLimit, "Allowed IQR/median; 0 disables");

  std::string elfFile;
  auto* elfDump = app.add_subcommand("elf-dump", "List sections and symbols of an ELF file");
  elfDump->add_option("object", elfFile, "ELF file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUserError;
  }

  if (*compile) {
    ProgramAnalysis analysis = analyzeFile(compileArgs);
    fs::path dir = workDir(compileArgs.out, compileArgs.file);
    std::string name = kernelNameOf(compileArgs.file);
    writeProgram(emitProgram(analysis, {name}), dir, name);
    if (emitSymtab) std::cout << dumpSymbols(analysis);
    std::cerr << "wrote " << dir.string() << "\n";
    return 0;
  }
  if (*build) {
    BuiltKernel k = buildFile(buildArgs, kernelNameOf(buildArgs.file));
    std::cout << k.binary.string() << "\n";
    for (const auto& o : k.objects) std::cout << o.string() << "\n";
    return 0;
  }
  if (*run) {
    BuiltKernel k = buildFile(runArgs, kernelNameOf(runArgs.file));
    RunOptions options;
    options.timeout = std::chrono::seconds(timeoutSeconds);
    if (!eventLog.empty()) options.eventLog = eventLog;
    RunReport r = runKernel(k, options);
    std::cout << r.output << r.stdoutText << std::flush;
    std::cerr << r.stderrText;
    if (r.timedOut) {
      std::cerr << "error: kernel timed out after " << timeoutSeconds << " s\n";
      return kUserError;
    }
    if (r.channelError) {
      std::cerr << "error: channel: " << *r.channelError << "\n";
      return kInternalError;
    }
    return r.processStatus == 0 ? 0 : kUserError;
  }
  if (*interp) {
    InterpResult r = interpretSource(interpFile, SourceProgram::fromFile(interpFile).body(),
                                     *parseDispatchPolicy(interpDispatch));
    std::cout << r.output << std::flush;
    if (showLoads)
      for (const auto& name : r.loadTrace) std::cerr << "load " << name << "\n";
    if (r.error) {
      std::cerr << "error: " << *r.error << "\n";
      return kUserError;
    }
    return 0;
  }
  if (*bench) {
    BenchmarkSpec spec = BenchmarkSpec::load(benchSpec);
    if (benchReps) {
      if (*benchReps < 5) throw UserError("--repetitions must be at least 5");
      spec.repetitions = *benchReps;
    }
    BenchOptions options;
    options.workDir = workDir(benchOut, benchSpec);
    options.varianceLimit = varianceLimit;
    BenchResult r = runSuite(spec, options);
    std::cout << r.table();
    std::cerr << "wrote " << (options.workDir / "results.csv").string() << "\n";
    return 0;
  }
  if (*elfDump) {
    ElfParseOptions lenient;
    lenient.requireRelocatable = false;
    std::cout << dumpElf(parseElfFile(elfFile, lenient));
    return 0;
  }
  return kUserError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return runMain(argc, argv);
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const CompileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const ElfError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const VarianceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const BenchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const HostError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == HostErrorKind::Config ? kUserError : kInternalError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}
