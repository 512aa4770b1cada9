#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "microdyn/ast.hpp"

namespace microdyn {

enum class Kind { Int, Real, Complex, Vector, Proc, Object, Str };

std::string_view kindName(Kind kind);

enum class DispatchMode { StaticDispatch, DynamicDispatch, DynamicLoad };

std::string_view dispatchName(DispatchMode mode);

/// How the driver overrides the per-function classification.
enum class DispatchPolicy {
  Auto,     // decorators decide DynamicLoad, otherwise the static predicate
  Static,   // ignore decorators; static where legal, dynamic dispatch elsewhere
  Dynamic,  // every function resident and called through its proc
  Load,     // every top-level function dynamically loaded
};

std::optional<DispatchPolicy> parseDispatchPolicy(std::string_view text);

struct SymbolEntry {
  std::string name;
  Kind kind = Kind::Int;
  /// Element kind for vectors (Int or Real).
  Kind elemKind = Kind::Int;
  int defLevel = 0;
  int offset = 0;
  bool isDynamic = false;
  bool isDeferred = false;
  bool isArgument = false;
  /// Owning scope index.
  int scope = 0;
  /// Function bound by a `def` of this name in this scope, or -1.
  int defFunction = -1;
  /// Number of binding sites other than the def itself.
  int otherBindings = 0;
  bool deleted = false;
  /// Proc class representative after inference, -1 for non-procs.
  int procClass = -1;
};

struct FrameLayout {
  int slotCount = 0;
  int argCount = 0;
  std::string functionName;
};

struct ResolvedRef {
  int relLevel = 0;
  int offset = 0;
  Kind kind = Kind::Int;
  int symbol = -1;
};

struct DispatchClass {
  DispatchMode mode = DispatchMode::DynamicDispatch;
};

struct Scope {
  int parent = -1;
  int depth = 0;
  int function = -1;  // -1 for the module scope
  std::string qualName;
  std::vector<int> symbols;  // in offset order
  std::map<std::string, int> byName;
  std::set<std::string> globals;
  std::set<std::string> nonlocals;
};

struct FunctionInfo {
  std::string name;
  std::string qualName;
  int node = -1;    // FunctionDef node id
  int scope = -1;   // the function's own scope
  int parentScope = -1;
  int depth = 1;
  int index = 0;    // definition order; mangled name is oly_e<index + 1>
  bool decoratedDynamic = false;
  bool decoratedDeferred = false;
  DispatchMode dispatch = DispatchMode::DynamicDispatch;
  /// Top-level ancestor (itself when top-level).
  int topLevel = -1;
  /// Symbol the def binds.
  int symbol = -1;
  Kind returnKind = Kind::Int;
  Kind returnElem = Kind::Int;
  bool returnsValue = false;
  bool recursive = false;
  bool refsEnclosing = false;
  std::vector<int> callees;
};

/// Per-expression inference result.
struct ExprInfo {
  Kind kind = Kind::Int;
  Kind elemKind = Kind::Int;
  int procClass = -1;
  bool none = false;  // value-less (print/mark/None-returning call)
};

enum class CallTarget { User, Print, Len, LoadFunction, Mark };

struct ProcSignature {
  std::vector<Kind> params;
  std::vector<Kind> paramElems;
  Kind ret = Kind::Int;
  Kind retElem = Kind::Int;
  bool returnsValue = false;
  std::vector<int> functions;  // member functions in definition order
};

struct ProgramAnalysis {
  Node ast;
  std::vector<Scope> scopes;
  std::vector<SymbolEntry> symbols;
  std::vector<FunctionInfo> functions;
  std::vector<FrameLayout> frames;  // index 0 is the module frame, then function i at i + 1

  /// Indexed by node id.
  std::vector<std::optional<ResolvedRef>> refs;
  std::vector<ExprInfo> exprs;
  std::vector<int> nodeScope;
  std::vector<int> nodeFunction;  // FunctionDef node -> function index
  std::map<int, CallTarget> callTargets;
  /// load_function call node -> function index
  std::map<int, int> loadTargets;

  std::map<int, ProcSignature> procClasses;
  int maxLexLevels = 1;
  DispatchPolicy policy = DispatchPolicy::Auto;
  std::vector<int> residentFunctions;
  std::vector<int> dynamicFunctions;

  const FrameLayout& frameOf(int function) const { return frames[static_cast<std::size_t>(function + 1)]; }
  const FunctionInfo* functionNamed(std::string_view name) const;
  const ResolvedRef& ref(const Node& n) const;
  const ExprInfo& expr(const Node& n) const { return exprs[static_cast<std::size_t>(n.id)]; }
  /// Kind table keyed by (qualified scope, variable).
  std::map<std::pair<std::string, std::string>, Kind> kindTable() const;
};

struct AnalysisOptions {
  DispatchPolicy policy = DispatchPolicy::Auto;
  /// Explicit display size; std::nullopt computes it.
  std::optional<int> maxLexLevels;
  /// Kind pins keyed by "qualified.scope.var" (module scope is "<module>").
  std::map<std::string, Kind> kindHints;
};

/// Builds scopes, assigns frame offsets and resolves every name.
ProgramAnalysis resolveScopes(Node ast);

/// Whole-program kind inference (Int joins to Real; procs unify by class).
void inferKinds(ProgramAnalysis& analysis, const std::map<std::string, Kind>& hints = {});

int computeMaxLexLevels(const ProgramAnalysis& analysis);

/// Decorator/predicate classification of one function (no policy applied).
DispatchClass classifyDispatch(int function, const ProgramAnalysis& analysis);

/// Splits top-level functions by dispatch and validates decorator placement.
std::pair<std::vector<int>, std::vector<int>> partitionDynamic(ProgramAnalysis& analysis);

/// Full pipeline with dispatch policy and display sizing applied.
ProgramAnalysis analyze(Node ast, const AnalysisOptions& options = {});

/// One `name defLevel offset kind dispatch` line per symbol.
std::string dumpSymbols(const ProgramAnalysis& analysis);

}  // namespace microdyn
