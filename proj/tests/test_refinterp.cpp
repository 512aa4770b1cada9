#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "differential.hpp"
#include "microdyn/bench.hpp"
#include "microdyn/numeric.hpp"
#include "microdyn/refinterp.hpp"

using namespace microdyn;
namespace fs = std::filesystem;

namespace {

InterpResult run(const std::string& text, DispatchPolicy policy = DispatchPolicy::Auto) {
  return interpretSource("t.py", text, policy);
}

std::string corpus(const std::string& name) {
  return testutil::readFile(testutil::sourceDir() / "corpus" / (name + ".py"));
}

TEST(RefInterp, Listing6PrintsSevenAndLoadsTwice) {
  InterpResult r = run(corpus("listing6"));
  EXPECT_FALSE(r.error);
  EXPECT_EQ(r.output, "7\n");
  EXPECT_EQ(r.loadTrace, (std::vector<std::string>{"add_nums", "add"}));
}

TEST(RefInterp, MixedArithmeticPromotesToReal) {
  EXPECT_EQ(run("print(1+2.5)\n").output, "3.5\n");
  EXPECT_EQ(run("print(7/2, 6/3, 7//2, -7//2, -7%3)\n").output, "3.5 2.0 3 -4 2\n");
  EXPECT_EQ(run("x = 1\nx = 2.5\nprint(x)\nx = 3\nprint(x)\n").output, "2.5\n3.0\n");
}

TEST(RefInterp, IntArithmeticWraps) {
  EXPECT_EQ(run("x = 9223372036854775807\nprint(x + 1)\n").output, "-9223372036854775808\n");
  EXPECT_EQ(run("x = 4611686018427387904\nprint(x * 4)\n").output, "0\n");
}

TEST(RefInterp, RuntimeErrorsAreNamed) {
  EXPECT_EQ(run("print(1)\nprint(1 // 0)\nprint(2)\n").error, "ZeroDivisionError");
  EXPECT_EQ(run("print(1)\nprint(1 // 0)\n").output, "1\n");
  EXPECT_EQ(run("print(1.0 / 0)\n").error, "ZeroDivisionError");
  EXPECT_EQ(run("v = [1, 2]\nprint(v[2])\n").error, "IndexError");
  EXPECT_EQ(run("v = [1, 2]\nprint(v[-2])\n").output, "1\n");
  EXPECT_EQ(run("for i in range(1, 5, 0):\n  print(i)\n").error, "ValueError");
  EXPECT_EQ(run("def f():\n  return 1\ng = f\ndel f\nprint(g())\nprint(f())\n").error, "UnloadedProcError");
}

TEST(RefInterp, DeleteInvalidatesOnlyLoadedCode) {
  const std::string src = "@dynamic\ndef f():\n  return 1\ng = f\ndel f\nprint(g())\n";
  EXPECT_EQ(run(src, DispatchPolicy::Auto).error, "UnloadedProcError");
  InterpResult resident = run(src, DispatchPolicy::Dynamic);
  EXPECT_FALSE(resident.error);
  EXPECT_EQ(resident.output, "1\n");
}

TEST(RefInterp, DeepRecursionOverflowsTheFrameBudget) {
  InterpOptions o;
  o.maxCallDepth = 50;
  const std::string src = "def f(n):\n  if n == 0:\n    return 0\n  return f(n - 1) + 1\nprint(f(40))\nprint(f(60))\n";
  InterpResult r = interpretSource("t.py", src, DispatchPolicy::Auto, o);
  EXPECT_EQ(r.output, "40\n");
  EXPECT_EQ(r.error, "FrameOverflow");
}

TEST(RefInterp, StepLimitStopsRunawayLoops) {
  InterpOptions o;
  o.maxSteps = 1000;
  EXPECT_EQ(interpretSource("t.py", "while 1:\n  x = 1\n", DispatchPolicy::Auto, o).error, "StepLimit");
}

TEST(RefInterp, ClosuresSeeTheirDefiningActivation) {
  const std::string src =
      "def outer(n):\n"
      "  def inner(k):\n"
      "    return n * 10 + k\n"
      "  if n > 0:\n"
      "    print(outer(n - 1) + inner(0))\n"
      "  return inner(n)\n"
      "print(outer(2))\n";
  // Recursive activations each keep their own `n`.
  EXPECT_EQ(run(src).output, "10\n31\n22\n");
}

TEST(RefInterp, KindTraceMatchesInferenceOnJacobi) {
  std::string src = testutil::readFile(testutil::sourceDir() / "bench" / "jacobi.py");
  src = substituteParameters(src, {{"NX", 8}, {"MAX_ITERS", 5}});
  ProgramAnalysis a = analyze(parseSource(SourceProgram("jacobi.py", src)));
  InterpResult r = interpret(a);
  ASSERT_FALSE(r.error);
  auto table = a.kindTable();
  for (const auto& [key, kind] : r.kindTrace) {
    ASSERT_TRUE(table.count(key)) << key.first << "." << key.second;
    EXPECT_EQ(table.at(key), kind) << key.first << "." << key.second;
  }
  // Every variable the program stores to was observed.
  for (const auto& [key, kind] : table)
    if (key.second != "REPORT" && key.second != "tmp") EXPECT_TRUE(r.kindTrace.count(key)) << key.second;
}

/// The stencil written out directly: same operation order as the program.
std::vector<double> stencilResiduals(int nx, int iters) {
  std::vector<double> u(static_cast<std::size_t>(nx + 2), 0.0), w(u);
  u[static_cast<std::size_t>(nx + 1)] = 1.0;
  w[static_cast<std::size_t>(nx + 1)] = 1.0;
  std::vector<double> out;
  for (int k = 0; k < iters; ++k) {
    for (int i = 1; i <= nx; ++i) w[std::size_t(i)] = (u[std::size_t(i - 1)] + u[std::size_t(i + 1)]) * 0.5;
    std::swap(u, w);
    double total = 0.0;
    for (int i = 1; i <= nx; ++i) {
      double d = u[std::size_t(i - 1)] - 2.0 * u[std::size_t(i)] + u[std::size_t(i + 1)];
      total = total + d * d;
    }
    out.push_back(total);
  }
  return out;
}

TEST(RefInterp, JacobiResidualsMatchStencilOracle) {
  std::string src = testutil::readFile(testutil::sourceDir() / "bench" / "jacobi.py");
  src = substituteParameters(src, {{"NX", 16}, {"MAX_ITERS", 100}, {"REPORT", 1}});
  InterpResult r = run(src);
  ASSERT_FALSE(r.error);
  std::vector<double> expected = stencilResiduals(16, 100);
  std::istringstream in(r.output);
  std::vector<double> got;
  int k;
  double value;
  for (int line = 1; line <= 100; ++line) {
    ASSERT_TRUE(in >> k >> value);
    EXPECT_EQ(k, line);
    got.push_back(value);
  }
  ASSERT_TRUE(in >> value);
  EXPECT_NEAR(value, expected.back(), 1e-12 * std::fabs(expected.back()));
  for (std::size_t i = 0; i < expected.size(); ++i)
    EXPECT_NEAR(got[i], expected[i], 1e-12 * std::fabs(expected[i])) << "iteration " << i + 1;
}

TEST(RefInterp, DeterministicAcrossRuns) {
  for (const auto& file : testutil::corpusFiles()) {
    InterpResult a = run(testutil::readFile(file));
    InterpResult b = run(testutil::readFile(file));
    EXPECT_EQ(a.output, b.output) << file;
    EXPECT_EQ(a.error, b.error) << file;
    EXPECT_EQ(a.loadTrace, b.loadTrace) << file;
    EXPECT_EQ(a.kindTrace, b.kindTrace) << file;
  }
}

TEST(RefInterp, OutputDoesNotDependOnPolicy) {
  for (const auto& file : testutil::corpusFiles()) {
    InterpResult base = run(testutil::readFile(file));
    for (auto p : {DispatchPolicy::Static, DispatchPolicy::Dynamic, DispatchPolicy::Load}) {
      InterpResult r = run(testutil::readFile(file), p);
      EXPECT_EQ(r.output, base.output) << file;
    }
  }
}

// ---- oracle law ------------------------------------------------------------

class OracleLaw : public ::testing::TestWithParam<DispatchPolicy> {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("microdyn_oracle_" + std::to_string(::getpid()));
    fs::create_directories(root_);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }
  static inline fs::path root_;
};

TEST_P(OracleLaw, CorpusMatchesCompiledExecution) {
  auto files = testutil::corpusFiles();
  ASSERT_GE(files.size(), 20u);
  int tag = 0;
  for (const auto& file : files) {
    auto d = testutil::differential(file, GetParam(), root_ / std::to_string(tag++), root_ / "rtcache");
    EXPECT_FALSE(d.compiled.timedOut) << d.describe();
    EXPECT_TRUE(d.agrees()) << d.describe();
    EXPECT_TRUE(d.loadsAgree()) << d.describe();
  }
}

TEST_P(OracleLaw, RuntimeErrorsMatchCompiledExecution) {
  const std::vector<std::string> programs{
      "print(1)\nprint(1 // 0)\nprint(2)\n",
      "x = 0.0\nprint(2.5 / x)\n",
      "v = [1, 2]\nprint(v[-2])\nprint(v[2])\n",
      "for i in range(3, 0, 0):\n  print(i)\n",
      "def f():\n  return 1\ng = f\ndel f\nprint(g())\nprint(f())\n",
      "@dynamic\ndef f():\n  return 1\ng = f\ndel f\nprint(g())\n",
      "v = [0.5] * 3\nv[1] = 2\nv[-1] += 1\nprint(v, len(v), -7 % 3, 7 // -2)\n",
  };
  int tag = 0;
  for (const auto& text : programs) {
    fs::path file = root_ / ("err" + std::to_string(tag) + ".py");
    std::ofstream(file) << text;
    auto d = testutil::differential(file, GetParam(), root_ / ("e" + std::to_string(tag++)), root_ / "rtcache");
    EXPECT_TRUE(d.agrees()) << d.describe();
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, OracleLaw,
                         ::testing::Values(DispatchPolicy::Static, DispatchPolicy::Dynamic, DispatchPolicy::Load),
                         [](const auto& info) {
                           switch (info.param) {
                             case DispatchPolicy::Static: return std::string("Static");
                             case DispatchPolicy::Dynamic: return std::string("Dynamic");
                             default: return std::string("Load");
                           }
                         });

}  // namespace
