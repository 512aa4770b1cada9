#include "microdyn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "microdyn/numeric.hpp"
#include "microdyn/parser.hpp"
#include "microdyn/refinterp.hpp"

namespace microdyn {
namespace fs = std::filesystem;

namespace {

std::string readText(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw BenchError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double lastReal(const std::string& output, const std::string& variant) {
  std::istringstream in(output);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  try {
    std::size_t used = 0;
    double v = std::stod(last, &used);
    if (used == last.size()) return v;
  } catch (const std::exception&) {
  }
  throw BenchError(variant + ": expected a residual, got '" + last + "'");
}

DispatchPolicy policyOf(const std::string& variant) {
  if (variant == "static") return DispatchPolicy::Static;
  if (variant == "dynamic") return DispatchPolicy::Dynamic;
  return DispatchPolicy::Load;
}

void summarize(VariantResult& r) {
  r.median = median(r.samples);
  r.iqr = interquartileRange(r.samples);
}

struct Runner {
  const BenchmarkSpec& spec;
  const BenchOptions& opts;
  std::string source;

  VariantResult interp(int reps) const {
    VariantResult r;
    r.variant = "refinterp";
    ProgramAnalysis a = analyze(parseSource(SourceProgram(spec.program.string(), source)));
    for (int i = 0; i < reps; ++i) {
      auto t0 = std::chrono::steady_clock::now();
      InterpResult out = interpret(a);
      double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (out.error) throw BenchError("refinterp: " + *out.error);
      r.samples.push_back(out.markInterval("start", "stop").value_or(wall));
      r.output = out.output;
    }
    return r;
  }

  VariantResult compiled(const std::string& variant) const {
    VariantResult r;
    r.variant = variant;
    AnalysisOptions ao;
    ao.policy = policyOf(variant);
    ProgramAnalysis a = analyze(parseSource(SourceProgram(spec.program.string(), source)), ao);
    BuiltKernel k = buildKernel(emitProgram(a, {"jacobi"}), opts.workDir / variant, opts.profile, "jacobi",
                                {opts.workDir / "rtcache"});
    Measurement m = measure(k, spec.repetitions);
    if (m.last.processStatus != 0) throw BenchError(variant + ": kernel failed\n" + m.last.stderrText);
    r.samples = m.samples;
    r.residentBytes = m.sizes.residentBytes;
    r.dynamicBytes = m.sizes.dynamicBytes();
    r.totalBytes = m.sizes.totalBytes();
    r.output = m.last.output;
    return r;
  }

  VariantResult native() const {
    VariantResult r;
    r.variant = "native";
    fs::path dir = opts.workDir / "native";
    fs::create_directories(dir);
    fs::path binary = dir / "jacobi_native";
    std::vector<std::string> cmd = opts.profile.compiler;
    cmd.insert(cmd.end(), opts.profile.residentFlags.begin(), opts.profile.residentFlags.end());
    cmd.insert(cmd.end(), {spec.nativeReference.string(), "-o", binary.string()});
    cmd.insert(cmd.end(), opts.profile.linkFlags.begin(), opts.profile.linkFlags.end());
    CommandResult built = runCommand(cmd);
    if (built.status != 0) throw HostError(HostErrorKind::Toolchain, built.output);
    static const std::regex elapsed(R"(elapsed ([0-9.eE+-]+))");
    for (int i = 0; i < spec.repetitions; ++i) {
      CommandResult run =
          runCommand({binary.string(), std::to_string(spec.nx), std::to_string(spec.maxIters)});
      std::smatch m;
      if (run.status != 0 || !std::regex_search(run.output, m, elapsed))
        throw BenchError("native: run failed\n" + run.output);
      r.samples.push_back(std::stod(m[1].str()));
      r.output = std::regex_replace(run.output, std::regex(R"(elapsed [^\n]*\n?)"), "");
    }
    ElfParseOptions lenient;
    lenient.requireRelocatable = false;
    r.residentBytes = parseElfFile(binary, lenient).allocatedBytes();
    r.totalBytes = r.residentBytes;
    return r;
  }

  VariantResult once(const std::string& variant) const {
    if (variant == "refinterp") return interp(opts.interpRepetitions.value_or(spec.repetitions));
    if (variant == "native") return native();
    return compiled(variant);
  }

  VariantResult measured(const std::string& variant) const {
    for (int attempt = 1;; ++attempt) {
      VariantResult r = once(variant);
      summarize(r);
      r.residual = lastReal(r.output, variant);
      try {
        checkVariance(r, opts.varianceLimit);
        return r;
      } catch (const VarianceError&) {
        if (attempt >= opts.attempts) throw;
      }
    }
  }
};

std::string formatSeconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", s);
  return buf;
}

}  // namespace

VarianceError::VarianceError(std::string variant, double median, double iqr)
    : std::runtime_error(variant + ": interquartile range " + formatSeconds(iqr) + " s is too wide for median " +
                         formatSeconds(median) + " s"),
      variant_(std::move(variant)) {}

void checkVariance(const VariantResult& r, double limit) {
  if (limit > 0 && r.iqr > limit * r.median) throw VarianceError(r.variant, r.median, r.iqr);
}

BenchmarkSpec BenchmarkSpec::load(const fs::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(readText(file));
  } catch (const nlohmann::json::exception& e) {
    throw BenchError(file.string() + ": " + e.what());
  }
  BenchmarkSpec s;
  fs::path base = file.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  try {
    s.program = resolve(j.at("program").get<std::string>());
    s.nativeReference = resolve(j.value("native_reference", std::string("jacobi_native.c")));
    s.nx = j.value("nx", s.nx);
    s.maxIters = j.value("max_iters", s.maxIters);
    s.repetitions = j.value("repetitions", s.repetitions);
    if (j.contains("variants")) s.variants = j.at("variants").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw BenchError(file.string() + ": " + e.what());
  }
  for (const auto& v : s.variants)
    if (std::find(benchVariantNames().begin(), benchVariantNames().end(), v) == benchVariantNames().end())
      throw BenchError("unknown variant '" + v + "'");
  if (s.nx < 1) throw BenchError("nx must be positive");
  if (s.maxIters < 0) throw BenchError("max_iters must not be negative");
  if (s.repetitions < 5) throw BenchError("repetitions must be at least 5");
  return s;
}

const VariantResult* BenchResult::find(const std::string& variant) const {
  for (const auto& v : variants)
    if (v.variant == variant) return &v;
  return nullptr;
}

std::string BenchResult::csv() const {
  std::ostringstream out;
  out << "variant,median_s,iqr_s,resident_bytes,dynamic_bytes,total_bytes,residual\n";
  for (const auto& v : variants)
    out << v.variant << ',' << formatSeconds(v.median) << ',' << formatSeconds(v.iqr) << ',' << v.residentBytes << ','
        << v.dynamicBytes << ',' << v.totalBytes << ',' << formatReal(v.residual) << '\n';
  return out.str();
}

std::string BenchResult::table() const {
  const VariantResult* base = find("native");
  if (!base) base = find("static");
  std::ostringstream out;
  out << std::left << std::setw(10) << "variant" << std::right << std::setw(14) << "median (s)" << std::setw(12)
      << "iqr (s)" << std::setw(10) << "relative" << std::setw(11) << "resident" << std::setw(10) << "dynamic"
      << std::setw(10) << "total" << "  residual\n";
  for (const auto& v : variants) {
    std::string rel = base && base->median > 0 ? formatSeconds(v.median / base->median) + "x" : "-";
    out << std::left << std::setw(10) << v.variant << std::right << std::setw(14) << formatSeconds(v.median)
        << std::setw(12) << formatSeconds(v.iqr) << std::setw(10) << rel << std::setw(11) << v.residentBytes
        << std::setw(10) << v.dynamicBytes << std::setw(10) << v.totalBytes << "  " << formatReal(v.residual)
        << '\n';
  }
  return out.str();
}

std::string substituteParameters(const std::string& source, const std::map<std::string, std::int64_t>& values) {
  std::istringstream in(source);
  std::string out, line;
  static const std::regex assignment(R"(^([A-Za-z_][A-Za-z0-9_]*)(\s*=\s*)-?[0-9]+(\s*(#.*)?)$)");
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, assignment)) {
      auto it = values.find(m[1].str());
      if (it != values.end()) line = m[1].str() + m[2].str() + std::to_string(it->second) + m[3].str();
    }
    out += line + '\n';
  }
  return out;
}

BenchResult runSuite(const BenchmarkSpec& spec, const BenchOptions& options) {
  fs::create_directories(options.workDir);
  Runner runner{spec, options,
                substituteParameters(readText(spec.program), {{"NX", spec.nx}, {"MAX_ITERS", spec.maxIters}})};
  BenchResult result;
  for (const auto& v : spec.variants) result.variants.push_back(runner.measured(v));

  const VariantResult& ref = result.variants.front();
  for (const auto& v : result.variants) {
    double scale = std::max(std::fabs(ref.residual), std::fabs(v.residual));
    if (std::fabs(v.residual - ref.residual) > options.residualTolerance * scale)
      throw BenchError("residual of " + v.variant + " (" + formatReal(v.residual) + ") disagrees with " +
                       ref.variant + " (" + formatReal(ref.residual) + ")");
  }
  std::ofstream(options.workDir / "results.csv") << result.csv();
  std::ofstream(options.workDir / "results.txt") << result.table();
  return result;
}

}  // namespace microdyn
