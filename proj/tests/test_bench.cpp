#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "microdyn/bench.hpp"
#include "test_util.hpp"

using namespace microdyn;
namespace fs = std::filesystem;

namespace {

class Bench : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("microdyn_bench_" + std::to_string(::getpid()));
    fs::create_directories(root_);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static BenchmarkSpec spec(std::int64_t nx, std::int64_t iters) {
    BenchmarkSpec s = BenchmarkSpec::load(testutil::sourceDir() / "bench" / "jacobi.json");
    s.nx = nx;
    s.maxIters = iters;
    s.repetitions = 5;
    return s;
  }

  static BenchOptions options(const std::string& tag) {
    BenchOptions o;
    o.workDir = root_ / tag;
    // Millisecond kernels are dominated by scheduler noise.
    o.varianceLimit = 0;
    return o;
  }

  static inline fs::path root_;
};

TEST(BenchSpec, LoadsTheShippedSpec) {
  BenchmarkSpec s = BenchmarkSpec::load(testutil::sourceDir() / "bench" / "jacobi.json");
  EXPECT_EQ(s.nx, 100);
  EXPECT_EQ(s.maxIters, 10000);
  EXPECT_GE(s.repetitions, 5);
  EXPECT_EQ(s.variants, benchVariantNames());
  EXPECT_TRUE(fs::exists(s.program));
  EXPECT_TRUE(fs::exists(s.nativeReference));
}

TEST(BenchSpec, RejectsInvalidSpecs) {
  fs::path dir = fs::temp_directory_path() / ("microdyn_spec_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto attempt = [&](const std::string& json) {
    std::ofstream(dir / "s.json") << json;
    return BenchmarkSpec::load(dir / "s.json");
  };
  EXPECT_THROW(attempt(R"({"program": "p.py", "repetitions": 4})"), BenchError);
  EXPECT_THROW(attempt(R"({"program": "p.py", "variants": ["jit"]})"), BenchError);
  EXPECT_THROW(attempt(R"({"program": "p.py", "nx": 0})"), BenchError);
  EXPECT_THROW(attempt(R"({"nx": 4})"), BenchError);
  EXPECT_THROW(attempt("{"), BenchError);
  BenchmarkSpec s = attempt(R"({"program": "p.py", "nx": 4, "variants": ["static"]})");
  EXPECT_EQ(s.program, dir / "p.py");
  EXPECT_EQ(s.variants, std::vector<std::string>{"static"});
  fs::remove_all(dir);
}

TEST(BenchParameters, RewritesOnlyTopLevelIntegerAssignments) {
  const std::string src = "NX = 100\nMAX_ITERS = 10000  # sweeps\n  NX = 3\nNXY = 4\nNX2 = NX\n";
  EXPECT_EQ(substituteParameters(src, {{"NX", 7}, {"MAX_ITERS", 1}}),
            "NX = 7\nMAX_ITERS = 1  # sweeps\n  NX = 3\nNXY = 4\nNX2 = NX\n");
}

TEST(BenchVariance, RejectsWideSpread) {
  VariantResult r;
  r.variant = "static";
  r.median = 1.0;
  r.iqr = 0.2;
  EXPECT_NO_THROW(checkVariance(r, 0.2));
  r.iqr = 0.21;
  EXPECT_THROW(checkVariance(r, 0.2), VarianceError);
  EXPECT_NO_THROW(checkVariance(r, 0));
  try {
    checkVariance(r, 0.2);
  } catch (const VarianceError& e) {
    EXPECT_EQ(e.variant(), "static");
  }
}

TEST(BenchTable, CsvSchemaAndRows) {
  BenchResult b;
  b.variants.push_back({"native", {1, 2, 3}, 2, 1, 100, 0, 100, 0.25, ""});
  b.variants.push_back({"static", {4}, 4, 0, 200, 0, 200, 0.25, ""});
  EXPECT_EQ(b.csv(),
            "variant,median_s,iqr_s,resident_bytes,dynamic_bytes,total_bytes,residual\n"
            "native,2,1,100,0,100,0.25\n"
            "static,4,0,200,0,200,0.25\n");
  std::string t = b.table();
  EXPECT_NE(t.find("2x"), std::string::npos) << t;
  EXPECT_EQ(b.find("static")->residentBytes, 200u);
  EXPECT_EQ(b.find("load"), nullptr);
}

TEST_F(Bench, DegenerateGridAgreesAcrossVariants) {
  BenchResult r = runSuite(spec(1, 1), options("degenerate"));
  ASSERT_EQ(r.variants.size(), 5u);
  for (const auto& v : r.variants) {
    EXPECT_EQ(v.residual, 0.0) << v.variant;
    EXPECT_EQ(v.output, r.variants.front().output) << v.variant;
    EXPECT_EQ(v.samples.size(), 5u) << v.variant;
  }
  EXPECT_TRUE(fs::exists(root_ / "degenerate" / "results.csv"));
  EXPECT_TRUE(fs::exists(root_ / "degenerate" / "results.txt"));
}

TEST_F(Bench, SmallGridMatchesStencilOracle) {
  // Independent oracle: the stencil written out directly.
  const int nx = 16, iters = 100;
  std::vector<double> u(nx + 2, 0.0), w(u);
  u[nx + 1] = w[nx + 1] = 1.0;
  for (int k = 0; k < iters; ++k) {
    for (int i = 1; i <= nx; ++i) w[std::size_t(i)] = (u[std::size_t(i - 1)] + u[std::size_t(i + 1)]) * 0.5;
    std::swap(u, w);
  }
  double expected = 0.0;
  for (int i = 1; i <= nx; ++i) {
    double d = u[std::size_t(i - 1)] - 2.0 * u[std::size_t(i)] + u[std::size_t(i + 1)];
    expected += d * d;
  }
  BenchResult r = runSuite(spec(nx, iters), options("small"));
  for (const auto& v : r.variants)
    EXPECT_NEAR(v.residual, expected, 1e-12 * expected) << v.variant;

  // Loaded code lives outside the resident image.
  const VariantResult* load = r.find("load");
  const VariantResult* dynamic = r.find("dynamic");
  ASSERT_TRUE(load && dynamic);
  EXPECT_GT(load->dynamicBytes, 0u);
  EXPECT_EQ(dynamic->dynamicBytes, 0u);
  EXPECT_LT(load->residentBytes, dynamic->totalBytes);
  EXPECT_EQ(load->totalBytes, load->residentBytes + load->dynamicBytes);

  std::istringstream csv(testutil::readFile(root_ / "small" / "results.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 6);
}

}  // namespace
