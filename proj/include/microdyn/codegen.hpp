#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "microdyn/semant.hpp"

namespace microdyn {

enum class UnitKind { Resident, DynamicFunction };

struct TranslationUnit {
  std::string fileName;
  std::string body;
  UnitKind unitKind = UnitKind::Resident;
  /// Entry function of a dynamic unit, -1 for the resident unit.
  int function = -1;
};

struct DynSymbolEntry {
  std::string sourceName;
  std::string mangled;
  std::string objectFile;
  int argCount = 0;
  bool deferred = false;

  bool operator==(const DynSymbolEntry&) const = default;
};

/// Tab-separated `name mangled object argc defer` lines.
struct DynSymbolTable {
  std::vector<DynSymbolEntry> entries;

  const DynSymbolEntry* find(const std::string& name) const;
  std::string serialize() const;
  /// Throws CompileError(Io) on malformed lines.
  static DynSymbolTable parse(const std::string& text);

  bool operator==(const DynSymbolTable&) const = default;
};

struct CodegenConfig {
  std::string kernelName = "kernel";
};

struct EmittedProgram {
  std::vector<TranslationUnit> units;  // resident unit first
  DynSymbolTable symbols;

  const TranslationUnit& resident() const { return units.front(); }
};

/// `oly_e<index + 1>`.
std::string mangledName(int function);

/// C text of an expression as it would appear in the resident unit.
std::string emitExpression(const Node& node, const ProgramAnalysis& analysis);

/// Full C definition of one function as emitted into its unit.
std::string emitFunction(int function, const ProgramAnalysis& analysis);

/// The statement a `def` turns into at its definition site.
std::string emitDeclaration(int function, const ProgramAnalysis& analysis);

/// The statement `del(name)` turns into.
std::string emitDelete(const Node& deleteStatement, const ProgramAnalysis& analysis);

EmittedProgram emitProgram(const ProgramAnalysis& analysis, const CodegenConfig& config = {});

/// Writes every unit and `<kernel>.symtab`; IoError on failure.
void writeProgram(const EmittedProgram& program, const std::filesystem::path& dir,
                  const std::string& kernelName);

}  // namespace microdyn
