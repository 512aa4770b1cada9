// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "differential.hpp"
#include "elf_support.hpp"
#include "golden_check.hpp"
#include "microdyn/bench.hpp"
#include "microdyn/refinterp.hpp"
#include "scope_model.hpp"
#include "test_util.hpp"

using namespace microdyn;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

class Acceptance {
 public:
  explicit Acceptance(fs::path root) : root_(std::move(root)) {}

  void criterion(const std::string& name, double budgetSeconds, const std::function<Verdict()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v.ok = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > budgetSeconds) v.require(false, "took " + fixed(seconds, 1) + " s, budget " + fixed(budgetSeconds, 0) + " s");
    failures_ += v.ok ? 0 : 1;
    std::printf("%s %-22s %6.1fs  %s\n", v.ok ? "PASS" : "FAIL", name.c_str(), seconds, v.detail.c_str());
    std::fflush(stdout);
  }

  int failures() const { return failures_; }
  const fs::path& root() const { return root_; }

  static std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
  }

 private:
  fs::path root_;
  int failures_ = 0;
};

std::vector<double> stencil(int nx, int iters) {
  std::vector<double> u(static_cast<std::size_t>(nx + 2), 0.0), w(u);
  u.back() = w.back() = 1.0;
  std::vector<double> residuals;
  for (int k = 0; k < iters; ++k) {
    for (std::size_t i = 1; i <= std::size_t(nx); ++i) w[i] = (u[i - 1] + u[i + 1]) * 0.5;
    std::swap(u, w);
    double total = 0.0;
    for (std::size_t i = 1; i <= std::size_t(nx); ++i) {
      const double d = u[i - 1] - 2.0 * u[i] + u[i + 1];
      total = total + d * d;
    }
    residuals.push_back(total);
  }
  return residuals;
}

bool close(double a, double b, double rel) { return std::fabs(a - b) <= rel * std::max(std::fabs(a), std::fabs(b)); }

std::string jacobiSource(std::int64_t nx, std::int64_t iters, std::int64_t report) {
  return substituteParameters(testutil::readFile(testutil::sourceDir() / "bench" / "jacobi.py"),
                              {{"NX", nx}, {"MAX_ITERS", iters}, {"REPORT", report}});
}

double lastValue(const std::string& output) {
  std::istringstream in(output);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return std::stod(last);
}

Verdict golden() {
  Verdict v;
  int checked = 0;
  for (const char* name : {"listing1", "listing2", "listing3", "listing4", "listing5"}) {
    auto r = testutil::checkGolden(name);
    v.require(r.ok, std::string(name) + " differs");
    ++checked;
  }
  v.detail = v.ok ? std::to_string(checked) + " golden files match" : v.detail;
  return v;
}

Verdict oracle(const fs::path& root) {
  Verdict v;
  const auto files = testutil::corpusFiles();
  v.require(files.size() >= 20, "only " + std::to_string(files.size()) + " corpus programs");
  int runs = 0, agreed = 0;
  for (auto policy : {DispatchPolicy::Static, DispatchPolicy::Dynamic, DispatchPolicy::Load}) {
    for (const auto& file : files) {
      auto d = testutil::differential(file, policy, root / ("d" + std::to_string(runs)), root / "rtcache");
      ++runs;
      if (d.agrees() && d.loadsAgree() && !d.compiled.timedOut)
        ++agreed;
      else
        v.require(false, d.program + " under policy " + std::to_string(static_cast<int>(policy)));
    }
  }
  v.require(runs >= 60, "only " + std::to_string(runs) + " differential runs");
  if (v.ok) v.detail = std::to_string(agreed) + "/" + std::to_string(runs) + " runs byte-identical, load traces equal";
  return v;
}

Verdict jacobi(const fs::path& root) {
  Verdict v;
  // Small grid: every reported residual against the stencil.
  const auto expected = stencil(16, 100);
  InterpResult small = interpretSource("jacobi.py", jacobiSource(16, 100, 1));
  v.require(!small.error, "interpreter failed on NX=16");
  std::istringstream in(small.output);
  int k = 0;
  double value = 0;
  std::size_t matched = 0;
  for (double want : expected)
    if (in >> k >> value && close(value, want, 1e-12)) ++matched;
  v.require(matched == expected.size(), "NX=16: " + std::to_string(matched) + "/100 residuals within 1e-12");

  // Full grid: every compiled mode against the interpreter.
  const std::string full = jacobiSource(100, 10000, 0);
  fs::create_directories(root);
  const fs::path src = root / "jacobi_full.py";
  std::ofstream(src) << full;
  InterpResult ref = interpretSource("jacobi.py", full);
  v.require(!ref.error, "interpreter failed on NX=100");
  const double refResidual = lastValue(ref.output);
  v.require(close(refResidual, stencil(100, 10000).back(), 1e-12), "NX=100 interpreter vs stencil");
  double worst = 0;
  for (auto policy : {DispatchPolicy::Static, DispatchPolicy::Dynamic, DispatchPolicy::Load}) {
    AnalysisOptions options;
    options.policy = policy;
    auto k2 = buildKernel(emitProgram(analyze(parseSource(SourceProgram(src.string(), full)), options), {"j"}),
                          root / ("j" + std::to_string(static_cast<int>(policy))), ToolchainProfile::fromEnvironment(),
                          "j", {root / "rtcache"});
    RunReport r = runKernel(k2);
    v.require(r.processStatus == 0, "compiled run failed");
    const double got = lastValue(r.output);
    worst = std::max(worst, std::fabs(got - refResidual) / std::fabs(refResidual));
    v.require(close(got, refResidual, 1e-9), "policy " + std::to_string(static_cast<int>(policy)) + " residual");
  }
  if (v.ok) v.detail = "NX=16 100/100 within 1e-12; NX=100 worst relative gap " + Acceptance::fixed(worst, 17);
  return v;
}

struct SuiteOutcome {
  std::optional<BenchResult> result;
  std::string error;
};

SuiteOutcome runBench(const fs::path& root) {
  SuiteOutcome out;
  try {
    BenchmarkSpec spec = BenchmarkSpec::load(testutil::sourceDir() / "bench" / "jacobi.json");
    // The interpreter column is not part of the envelope and costs ~1 s a run.
    spec.variants = {"static", "dynamic", "load", "native"};
    spec.repetitions = 11;
    BenchOptions options;
    options.workDir = root / "bench";
    options.attempts = 3;
    out.result = runSuite(spec, options);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

Verdict performance(const SuiteOutcome& suite) {
  Verdict v;
  if (!suite.result) {
    v.require(false, suite.error);
    return v;
  }
  const auto& r = *suite.result;
  const double native = r.find("native")->median, stat = r.find("static")->median;
  const double dyn = r.find("dynamic")->median, load = r.find("load")->median;
  v.require(stat <= 5 * native, "static/native " + Acceptance::fixed(stat / native, 2) + " > 5");
  v.require(dyn >= stat, "dynamic faster than static");
  v.require(std::fabs(load / dyn - 1) <= 0.15, "load/dynamic " + Acceptance::fixed(load / dyn, 3));
  v.detail = (v.ok ? "" : v.detail + " | ") + "native " + Acceptance::fixed(native * 1e3, 2) + " ms, static " +
             Acceptance::fixed(stat / native, 2) + "x, dynamic/static " + Acceptance::fixed(dyn / stat, 2) +
             ", load/dynamic " + Acceptance::fixed(load / dyn, 3);
  return v;
}

Verdict sizes(const SuiteOutcome& suite) {
  Verdict v;
  if (!suite.result) {
    v.require(false, suite.error);
    return v;
  }
  const VariantResult* load = suite.result->find("load");
  const VariantResult* dyn = suite.result->find("dynamic");
  v.require(load->residentBytes < dyn->residentBytes, "load resident not smaller than dynamic binary");
  v.require(load->dynamicBytes > 0, "no dynamic bytes reported");
  v.require(dyn->dynamicBytes == 0, "dynamic dispatch reported loaded bytes");
  if (v.ok)
    v.detail = "resident " + std::to_string(load->residentBytes) + " B < " + std::to_string(dyn->residentBytes) +
               " B, loaded " + std::to_string(load->dynamicBytes) + " B separately";
  return v;
}

Verdict elfChecks(const fs::path& root) {
  Verdict v;
  auto objects = testutil::buildDynamicObjects(root / "elf", 10);
  v.require(objects.size() == 10, "only " + std::to_string(objects.size()) + " objects built");
  std::vector<std::vector<std::uint8_t>> seeds;
  for (const auto& [object, entry] : objects) {
    auto problems = testutil::elfFidelity(object, entry);
    v.require(problems.empty(), object.filename().string() + ": " + (problems.empty() ? "" : problems.front()));
    seeds.push_back(testutil::readBytes(object));
  }
  auto stats = testutil::fuzzElf(seeds, 100000, 0xacce);
  v.require(stats.iterations == 100000, "fuzz stopped early");
  v.require(stats.untyped.empty(), std::to_string(stats.untyped.size()) + " untyped failures");
  if (v.ok)
    v.detail = "10/10 objects match binutils; 1e5 mutants: " + std::to_string(stats.parsed) + " parsed, " +
               std::to_string(stats.typedErrors) + " typed errors, 0 other";
  return v;
}

Verdict scopes() {
  Verdict v;
  auto sweep = testutil::scopeSweep(1000);
  v.require(sweep.mismatches.empty(), std::to_string(sweep.mismatches.size()) + " mismatches, first " +
                                          (sweep.mismatches.empty() ? "" : sweep.mismatches.front()));
  v.require(sweep.resolved > 1000 && sweep.errors > 50, "generator did not exercise both outcomes");
  if (v.ok)
    v.detail = std::to_string(sweep.programs) + " programs, " + std::to_string(sweep.resolved) +
               " reads equal, " + std::to_string(sweep.errors) + " rejections agree";
  return v;
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / ("microdyn_accept_" + std::to_string(::getpid()));
  fs::create_directories(root);
  Acceptance a(root);

  a.criterion("golden-codegen", 1, golden);
  a.criterion("oracle-equivalence", 120, [&] { return oracle(root / "oracle"); });
  a.criterion("jacobi-correctness", 60, [&] { return jacobi(root / "jacobi"); });

  SuiteOutcome suite;
  a.criterion("performance-envelope", 300, [&] {
    suite = runBench(root);
    return performance(suite);
  });
  a.criterion("size-ordering", 60, [&] { return sizes(suite); });
  a.criterion("hardware-substitutes", 1, [&] {
    Verdict v;
    v.require(suite.result.has_value(), "host benchmark unavailable");
    if (v.ok) v.detail = "board timings replaced by the host envelope and size ordering above";
    return v;
  });
  a.criterion("elf-robustness", 120, [&] { return elfChecks(root); });
  a.criterion("scope-brute-force", 30, scopes);

  fs::remove_all(root);
  std::printf("%s: %d criteria failed\n", a.failures() ? "FAIL" : "PASS", a.failures());
  return a.failures() ? 1 : 0;
}
