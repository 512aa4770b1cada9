#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <regex>
#include <set>

#include "golden_check.hpp"
#include "microdyn/codegen.hpp"
#include "microdyn/error.hpp"
#include "microdyn/parser.hpp"
#include "microdyn/runtime_text.hpp"
#include "microdyn/semant.hpp"
#include "test_util.hpp"

using namespace microdyn;
using testutil::squeeze;

namespace {

ProgramAnalysis analyzeText(const std::string& text, AnalysisOptions options = {}) {
  return analyze(parseSource(SourceProgram("t.py", text)), options);
}

ProgramAnalysis analyzeFile(const std::filesystem::path& p, DispatchPolicy policy) {
  AnalysisOptions options;
  options.policy = policy;
  return analyze(parseSource(SourceProgram::fromFile(p)), options);
}

constexpr DispatchPolicy kPolicies[] = {DispatchPolicy::Auto, DispatchPolicy::Static, DispatchPolicy::Dynamic,
                                         DispatchPolicy::Load};

class Golden : public ::testing::TestWithParam<std::string> {};

TEST_P(Golden, ReproducesListing) {
  auto result = testutil::checkGolden(GetParam());
  EXPECT_TRUE(result.ok) << result.detail;
}

INSTANTIATE_TEST_SUITE_P(Listings, Golden,
                         ::testing::Values("listing1", "listing2", "listing3", "listing4", "listing5"));

TEST(Codegen, Listing6SplitsIntoResidentAndTwoDynamicUnits) {
  auto a = analyzeFile(testutil::sourceDir() / "corpus" / "listing6.py", DispatchPolicy::Auto);
  auto program = emitProgram(a, {"listing6"});
  ASSERT_EQ(program.units.size(), 3u);
  EXPECT_EQ(program.units[0].unitKind, UnitKind::Resident);
  EXPECT_EQ(program.units[0].fileName, "listing6.c");
  EXPECT_EQ(program.units[1].unitKind, UnitKind::DynamicFunction);
  EXPECT_EQ(program.units[2].unitKind, UnitKind::DynamicFunction);
  ASSERT_EQ(program.symbols.entries.size(), 2u);
  const auto* add = program.symbols.find("add");
  ASSERT_NE(add, nullptr);
  EXPECT_EQ(add->mangled, "oly_e1");
  EXPECT_EQ(add->objectFile, "listing6_oly_e1.o");
  EXPECT_EQ(add->argCount, 2);
  EXPECT_TRUE(add->deferred);
  const auto* nums = program.symbols.find("add_nums");
  ASSERT_NE(nums, nullptr);
  EXPECT_EQ(nums->argCount, 0);
  EXPECT_FALSE(nums->deferred);
  // Each dynamic unit defines its entry as the only external function.
  for (std::size_t i = 1; i < program.units.size(); ++i) {
    const auto& unit = program.units[i];
    const std::string entry = mangledName(unit.function);
    EXPECT_NE(unit.body.find("Int " + entry + "(Env env, Object self)"), std::string::npos);
    EXPECT_NE(unit.body.find("#define OLY_DYNAMIC_UNIT"), std::string::npos);
    EXPECT_EQ(unit.body.find("main("), std::string::npos);
  }
}

TEST(Codegen, DeleteTargetsGlobalSlot) {
  auto a = analyzeFile(testutil::sourceDir() / "corpus" / "listing6.py", DispatchPolicy::Auto);
  const Node* del = nullptr;
  std::function<void(const Node&)> walk = [&](const Node& n) {
    if (n.kind == NodeKind::Delete) del = &n;
    for (const auto& c : n.children) walk(c);
  };
  walk(a.ast);
  ASSERT_NE(del, nullptr);
  EXPECT_EQ(squeeze(emitDelete(*del, a)), "delete_proc(env,1,1);");
}

TEST(Codegen, NoDynamicFunctionsGivesSingleUnitAndEmptyTable) {
  auto a = analyzeText("def f(x):\n    return x * 2\nprint(f(4))\n");
  auto program = emitProgram(a);
  ASSERT_EQ(program.units.size(), 1u);
  EXPECT_TRUE(program.symbols.entries.empty());
  EXPECT_NE(program.resident().body.find("int main("), std::string::npos);
  EXPECT_NE(program.resident().body.find("NULL, 0}"), std::string::npos);
}

TEST(Codegen, ConstantFunctionHasNoLookups) {
  auto a = analyzeText("def seven():\n    return 7\nprint(seven())\n");
  const std::string text = emitFunction(0, a);
  EXPECT_NE(squeeze(text).find("Intoly_e1(Envenv,Objectself){return(7);}"), std::string::npos) << text;
  EXPECT_EQ(text.find("lookup_"), std::string::npos);
}

TEST(Codegen, RealReturnUsesRealSignature) {
  auto a = analyzeText("def half(x):\n    return x / 2\nprint(half(3))\n");
  EXPECT_NE(emitFunction(0, a).find("Real oly_e1(Env env, Object self)"), std::string::npos);
}

TEST(Codegen, DynamicUnitLiteralsAvoidDataSections) {
  auto a = analyzeText(
      "from epython import dynamic\n@dynamic\ndef f(x):\n    print(\"hi\", x * 1.5)\n    return 0\nf(2)\n");
  auto program = emitProgram(a);
  ASSERT_EQ(program.units.size(), 2u);
  const std::string& body = program.units[1].body;
  EXPECT_NE(body.find("oly_real_bits(0x3ff8000000000000ULL)"), std::string::npos) << body;
  EXPECT_NE(body.find("oly_intern(env,"), std::string::npos) << body;
  EXPECT_EQ(body.find("\"hi\""), std::string::npos) << body;
}

TEST(Codegen, SymtabRoundTrips) {
  DynSymbolTable table;
  table.entries.push_back({"add", "oly_e1", "k_oly_e1.o", 2, true});
  table.entries.push_back({"add_nums", "oly_e2", "k_oly_e2.o", 0, false});
  const std::string text = table.serialize();
  EXPECT_EQ(text, "add\toly_e1\tk_oly_e1.o\t2\t1\nadd_nums\toly_e2\tk_oly_e2.o\t0\t0\n");
  EXPECT_EQ(DynSymbolTable::parse(text), table);
  EXPECT_THROW(DynSymbolTable::parse("add\toly_e1\n"), CompileError);
  EXPECT_THROW(DynSymbolTable::parse("add\toly_e1\tk.o\ttwo\t0\n"), CompileError);
  EXPECT_THROW(DynSymbolTable::parse("add\toly_e1\tk.o\t2\t7\n"), CompileError);
}

TEST(Codegen, WriteProgramCreatesUnitsAndSymtab) {
  auto a = analyzeFile(testutil::sourceDir() / "corpus" / "listing6.py", DispatchPolicy::Auto);
  auto program = emitProgram(a, {"k"});
  const auto dir = std::filesystem::temp_directory_path() / ("microdyn_cg_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  writeProgram(program, dir, "k");
  for (const auto& unit : program.units) EXPECT_EQ(testutil::readFile(dir / unit.fileName), unit.body);
  EXPECT_EQ(DynSymbolTable::parse(testutil::readFile(dir / "k.symtab")), program.symbols);
  std::filesystem::remove_all(dir);
}

TEST(CodegenProperty, Deterministic) {
  for (const auto& file : testutil::corpusFiles())
    for (DispatchPolicy policy : kPolicies) {
      auto first = emitProgram(analyzeFile(file, policy));
      auto second = emitProgram(analyzeFile(file, policy));
      ASSERT_EQ(first.units.size(), second.units.size()) << file;
      for (std::size_t i = 0; i < first.units.size(); ++i)
        EXPECT_EQ(first.units[i].body, second.units[i].body) << file << " unit " << i;
      EXPECT_EQ(first.symbols, second.symbols);
    }
}

TEST(CodegenProperty, SymbolTableCoversExactlyTheDynamicSet) {
  for (const auto& file : testutil::corpusFiles())
    for (DispatchPolicy policy : kPolicies) {
      auto a = analyzeFile(file, policy);
      auto program = emitProgram(a);
      ASSERT_EQ(program.symbols.entries.size(), a.dynamicFunctions.size()) << file;
      ASSERT_EQ(program.units.size(), a.dynamicFunctions.size() + 1) << file;
      for (int fn : a.dynamicFunctions) {
        const auto* e = program.symbols.find(a.functions[static_cast<std::size_t>(fn)].name);
        ASSERT_NE(e, nullptr);
        EXPECT_EQ(e->mangled, mangledName(fn));
        EXPECT_EQ(e->argCount, a.frameOf(fn).argCount);
      }
    }
}

std::set<std::string> identifiers(const std::string& text) {
  std::set<std::string> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '"' || c == '\'') {
      for (++i; i < text.size() && text[i] != c; ++i)
        if (text[i] == '\\') ++i;
      ++i;
    } else if (text.compare(i, 2, "/*") == 0) {
      i = std::min(text.find("*/", i + 2), text.size()) + 2;
    } else if (text.compare(i, 2, "//") == 0 || text.compare(i, 8, "#include") == 0) {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '.')) ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      ids.insert(text.substr(i, j - i));
      i = j;
    } else {
      ++i;
    }
  }
  return ids;
}

TEST(CodegenProperty, AbiClosure) {
  std::set<std::string> allowed = identifiers(std::string(runtimeHeaderText()));
  for (const char* kw : {"auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
                         "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
                         "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch",
                         "typedef", "union", "unsigned", "void", "volatile", "while", "NULL"})
    allowed.insert(kw);
  // Locals and parameters the emitter itself introduces.
  for (const char* local : {"env", "self", "main", "argc", "argv", "p", "ce", "base", "r", "f", "disp", "v", "n",
                            "frame", "oly_module", "oly_dyn_table", "oly_program"})
    allowed.insert(local);
  const std::regex generated("oly_(e\\d+(_slots)?|t\\d+|call_\\w+|scall_e\\d+|list_[ir]\\d+)|a\\d+|[ULD]");
  for (const auto& file : testutil::corpusFiles())
    for (DispatchPolicy policy : kPolicies)
      for (const auto& unit : emitProgram(analyzeFile(file, policy)).units)
        for (const auto& id : identifiers(unit.body))
          EXPECT_TRUE(allowed.count(id) || std::regex_match(id, generated))
              << "unexpected identifier " << id << " in " << file << " " << unit.fileName;
}

int ancestor(const ProgramAnalysis& a, int scope, int levels) {
  for (int i = 0; i < levels && scope >= 0; ++i) scope = a.scopes[static_cast<std::size_t>(scope)].parent;
  return scope;
}

void checkAccessors(const ProgramAnalysis& a, const std::string& text, int scope, const std::string& where) {
  static const std::regex access("\\b(lookup|update)_(int|real|complex|vector|proc|str|object)\\(env,(\\d+),(\\d+)");
  for (std::sregex_iterator it(text.begin(), text.end(), access), end; it != end; ++it) {
    const int level = std::stoi((*it)[3]);
    const int offset = std::stoi((*it)[4]);
    const int target = ancestor(a, scope, level);
    ASSERT_GE(target, 0) << where;
    const auto& symbols = a.scopes[static_cast<std::size_t>(target)].symbols;
    ASSERT_LT(offset, static_cast<int>(symbols.size())) << where;
    const auto& sym = a.symbols[static_cast<std::size_t>(symbols[static_cast<std::size_t>(offset)])];
    std::string kind(kindName(sym.kind));
    for (auto& ch : kind) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    EXPECT_EQ((*it)[2].str(), kind) << where << ": " << it->str() << " addresses " << sym.name;
  }
}

TEST(CodegenProperty, AccessorKindMatchesSlotKind) {
  for (const auto& file : testutil::corpusFiles())
    for (DispatchPolicy policy : kPolicies) {
      auto a = analyzeFile(file, policy);
      for (const auto& fn : a.functions)
        checkAccessors(a, emitFunction(fn.index, a), fn.scope, file.string() + ":" + fn.qualName);
      const std::string resident = emitProgram(a).resident().body;
      const auto start = resident.find("static void oly_module(Env env)");
      ASSERT_NE(start, std::string::npos);
      const auto stop = resident.find("\n}\n", start);
      checkAccessors(a, resident.substr(start, stop - start), 0, file.string() + ":<module>");
    }
}

TEST(CodegenProperty, UnitsCompileAgainstRuntimeHeader) {
  const char* cc = std::getenv("MICRODYN_CC");
  const std::string compiler = cc ? cc : "cc";
  if (std::system((compiler + " --version > /dev/null 2>&1").c_str()) != 0) GTEST_SKIP() << "no C compiler";
  const auto dir = std::filesystem::temp_directory_path() / ("microdyn_cc_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "oly_rt.h") << runtimeHeaderText();
  }
  for (const auto& file : testutil::corpusFiles())
    for (DispatchPolicy policy : kPolicies) {
      auto program = emitProgram(analyzeFile(file, policy), {"k"});
      writeProgram(program, dir, "k");
      for (const auto& unit : program.units) {
        const std::string cmd = compiler + " -std=c99 -pedantic -Wall -Werror -Wno-unused -fsyntax-only -I" +
                                dir.string() + " " + (dir / unit.fileName).string() + " 2>&1";
        EXPECT_EQ(std::system(cmd.c_str()), 0) << file << " " << unit.fileName;
      }
      for (const auto& unit : program.units) std::filesystem::remove(dir / unit.fileName);
    }
  std::filesystem::remove_all(dir);
}

}  // namespace
