#include <gtest/gtest.h>

#include <unistd.h>

#include <chrono>
#include <fstream>

#include "elf_support.hpp"
#include "microdyn/elf.hpp"
#include "microdyn/host.hpp"

using namespace microdyn;
namespace fs = std::filesystem;

namespace {

ElfErrorKind kindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ElfError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an ElfError";
  return ElfErrorKind::Malformed;
}

class ElfTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("microdyn_elf_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    std::ofstream(dir_ / "probe.c") << "extern int external(int);\n"
                                       "static int counter;\n"
                                       "int pure_add(int a, int b) { return a + b; }\n"
                                       "int calls_out(int x) { return external(x) + 1; }\n"
                                       "int touches_global(int x) { counter += x; return counter; }\n"
                                       "int main(void) { return 0; }\n";
    profile_ = ToolchainProfile::fromEnvironment();
    auto cc = [](std::vector<std::string> args) {
      std::vector<std::string> cmd = profile_.compiler;
      cmd.insert(cmd.end(), args.begin(), args.end());
      auto r = runCommand(cmd);
      ASSERT_EQ(r.status, 0) << r.output;
    };
    cc({"-O2", "-fPIC", "-fcf-protection=none", "-c", (dir_ / "probe.c").string(), "-o", (dir_ / "probe.o").string()});
    std::ofstream(dir_ / "exe.c") << "int main(void) { return 0; }\n";
    cc({"-O2", (dir_ / "exe.c").string(), "-o", (dir_ / "exe").string()});
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::vector<std::uint8_t> probe() { return testutil::readBytes(dir_ / "probe.o"); }

  static inline fs::path dir_;
  static inline ToolchainProfile profile_;
};

TEST_F(ElfTest, ParsesProbeSymbols) {
  ElfImage image = parseElf(probe());
  EXPECT_EQ(image.fileType, elf::ET_REL);
  EXPECT_EQ(image.machine, hostMachine());
  for (const char* name : {"pure_add", "calls_out", "touches_global", "main"}) {
    const ElfSymbol* s = image.symbol(name);
    ASSERT_NE(s, nullptr) << name;
    EXPECT_EQ(s->type, elf::STT_FUNC);
    EXPECT_GT(s->size, 0u);
  }
  EXPECT_NE(image.section(".text"), nullptr);
  EXPECT_FALSE(image.relocations.empty());
}

TEST_F(ElfTest, ProbeMatchesBinutils) {
  // The probe's .text holds relocated neighbours, so only the function span is compared.
  for (const auto& p : testutil::elfFidelity(dir_ / "probe.o", "pure_add", false)) ADD_FAILURE() << p;
}

TEST_F(ElfTest, BadMagic) {
  auto bytes = probe();
  bytes[1] = 'X';
  EXPECT_EQ(kindOf([&] { parseElf(bytes); }), ElfErrorKind::BadMagic);
  EXPECT_EQ(kindOf([&] { parseElf(std::vector<std::uint8_t>{}); }), ElfErrorKind::BadMagic);
}

TEST_F(ElfTest, Truncated) {
  auto bytes = probe();
  EXPECT_EQ(kindOf([&] { parseElf(std::span(bytes).first(40)); }), ElfErrorKind::Truncated);
  // Cutting into the section header table.
  EXPECT_EQ(kindOf([&] { parseElf(std::span(bytes).first(bytes.size() - 8)); }), ElfErrorKind::Truncated);
}

TEST_F(ElfTest, RejectsBigEndianAndUnknownClass) {
  auto bytes = probe();
  bytes[5] = 2;
  EXPECT_EQ(kindOf([&] { parseElf(bytes); }), ElfErrorKind::UnsupportedEndianness);
  bytes = probe();
  bytes[4] = 7;
  EXPECT_EQ(kindOf([&] { parseElf(bytes); }), ElfErrorKind::UnsupportedClass);
}

TEST_F(ElfTest, ExecutableIsNotRelocatable) {
  EXPECT_EQ(kindOf([&] { parseElfFile(dir_ / "exe"); }), ElfErrorKind::NotRelocatable);
  ElfImage image = parseElfFile(dir_ / "exe", {.requireRelocatable = false});
  EXPECT_EQ(image.fileType == elf::ET_EXEC || image.fileType == elf::ET_DYN, true);
  // Allocated size agrees with readelf's section table.
  auto r = runCommand({"readelf", "-SW", (dir_ / "exe").string()});
  std::uint64_t expected = 0;
  std::istringstream in(r.output);
  const std::regex line(R"(^\s*\[\s*\d+\]\s+\S+\s+\S+\s+[0-9a-f]+\s+[0-9a-f]+\s+([0-9a-f]+)\s+[0-9a-f]+\s+(\S*A\S*)\s)");
  for (std::string l; std::getline(in, l);) {
    std::smatch m;
    if (std::regex_search(l, m, line)) expected += std::stoull(m[1], nullptr, 16);
  }
  EXPECT_GT(expected, 0u);
  EXPECT_EQ(image.allocatedBytes(), expected);
}

TEST_F(ElfTest, ExtractPureFunction) {
  ElfImage image = parseElf(probe());
  ElfFunction fn = extractFunction(image, "pure_add", hostMachine());
  const ElfSymbol* s = image.symbol("pure_add");
  EXPECT_EQ(fn.size, s->size);
  EXPECT_EQ(fn.codeBytes.size(), s->size);
  const auto& text = image.sections[s->sectionIndex].data;
  EXPECT_TRUE(std::equal(fn.codeBytes.begin(), fn.codeBytes.end(), text.begin() + static_cast<std::ptrdiff_t>(s->value)));
}

TEST_F(ElfTest, RelocationsAreFatal) {
  ElfImage image = parseElf(probe());
  EXPECT_EQ(kindOf([&] { extractFunction(image, "calls_out", hostMachine()); }), ElfErrorKind::RelocationUnresolved);
  EXPECT_EQ(kindOf([&] { extractFunction(image, "touches_global", hostMachine()); }),
            ElfErrorKind::RelocationUnresolved);
}

TEST_F(ElfTest, MachineGate) {
  ElfImage image = parseElf(probe());
  const std::uint16_t other = hostMachine() == elf::EM_RISCV ? elf::EM_X86_64 : elf::EM_RISCV;
  EXPECT_EQ(kindOf([&] { extractFunction(image, "pure_add", other); }), ElfErrorKind::MachineMismatch);
  EXPECT_EQ(kindOf([&] { extractUnitCode(image, "pure_add", elf::EM_ADAPTEVA_EPIPHANY); }),
            ElfErrorKind::MachineMismatch);
}

TEST_F(ElfTest, MissingSymbol) {
  ElfImage image = parseElf(probe());
  EXPECT_EQ(kindOf([&] { extractFunction(image, "nope", hostMachine()); }), ElfErrorKind::SymbolNotFound);
  // Undefined references are not definitions.
  EXPECT_EQ(kindOf([&] { extractFunction(image, "external", hostMachine()); }), ElfErrorKind::SymbolNotFound);
}

TEST_F(ElfTest, UnitEntryMustLeadItsSection) {
  ElfImage image = parseElf(probe());
  const ElfSymbol* s = image.symbol("main");
  ASSERT_NE(s, nullptr);
  if (s->value != 0) EXPECT_EQ(kindOf([&] { extractUnitCode(image, "main", hostMachine()); }), ElfErrorKind::Malformed);
}

TEST_F(ElfTest, Elf32ObjectsParse) {
  std::vector<std::string> cmd = profile_.compiler;
  const auto obj = dir_ / "probe32.o";
  cmd.insert(cmd.end(), {"-m32", "-O2", "-fno-pic", "-c", (dir_ / "probe.c").string(), "-o", obj.string()});
  if (runCommand(cmd).status != 0) GTEST_SKIP() << "toolchain cannot emit 32-bit objects";
  ElfImage image = parseElfFile(obj);
  EXPECT_FALSE(image.is64);
  EXPECT_EQ(image.machine, elf::EM_386);
  EXPECT_GT(extractFunction(image, "pure_add", elf::EM_386).size, 0u);
  EXPECT_EQ(kindOf([&] { extractFunction(image, "calls_out", elf::EM_386); }), ElfErrorKind::RelocationUnresolved);
  for (const auto& p : testutil::elfFidelity(obj, "pure_add", false)) ADD_FAILURE() << p;
}

TEST_F(ElfTest, GeneratedUnitsMatchBinutilsAndNeedNoRelocation) {
  auto objects = testutil::buildDynamicObjects(dir_ / "units", 10);
  ASSERT_EQ(objects.size(), 10u);
  for (const auto& [object, entry] : objects) {
    for (const auto& p : testutil::elfFidelity(object, entry)) ADD_FAILURE() << object << ": " << p;
    ElfImage image = parseElfFile(object);
    EXPECT_TRUE(image.relocations.empty()) << object;
    EXPECT_EQ(image.symbol(entry)->value, 0u);
  }
}

TEST_F(ElfTest, FuzzYieldsOnlyTypedErrors) {
  std::vector<std::vector<std::uint8_t>> seeds{probe()};
  for (const auto& [object, entry] : testutil::buildDynamicObjects(dir_ / "fuzz", 3))
    seeds.push_back(testutil::readBytes(object));
  const auto start = std::chrono::steady_clock::now();
  auto stats = testutil::fuzzElf(seeds, 100000, 0x5eed);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(stats.iterations, 100000);
  for (const auto& u : stats.untyped) ADD_FAILURE() << "untyped failure: " << u;
  EXPECT_GT(stats.parsed, 1000);
  EXPECT_GT(stats.typedErrors, 1000);
  EXPECT_LT(seconds, 120.0);
}

TEST(ElfDump, ListsSections) {
  ElfImage image;
  image.machine = elf::EM_X86_64;
  image.fileType = elf::ET_REL;
  image.sections.push_back({});
  ElfSection text;
  text.name = ".text";
  text.flags = elf::SHF_ALLOC | elf::SHF_EXECINSTR;
  text.size = 12;
  image.sections.push_back(text);
  image.symbols.push_back({"oly_e1", 0, 12, 1, elf::STT_FUNC, 1});
  const std::string dump = dumpElf(image);
  EXPECT_NE(dump.find(".text"), std::string::npos);
  EXPECT_NE(dump.find("oly_e1"), std::string::npos);
  EXPECT_NE(dump.find("allocated bytes: 12"), std::string::npos);
}

}  // namespace
