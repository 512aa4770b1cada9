#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "microdyn/source.hpp"

namespace microdyn {

enum class NodeKind {
  ModuleRoot,
  FunctionDef,
  Assign,
  AugAssign,
  Return,
  If,
  While,
  For,
  ExprStmt,
  GlobalDecl,
  NonlocalDecl,
  Delete,
  ImportFrom,
  Block,
  Call,
  BinOp,
  UnaryOp,
  Compare,
  Name,
  IntLit,
  RealLit,
  StringLit,
  ListLit,
  Index,
  Attribute,
};

std::string_view nodeKindName(NodeKind kind);
bool isStatement(NodeKind kind);

struct Decorator {
  std::string name;
  bool defer = false;
  SourceSpan span;
  bool operator==(const Decorator& o) const { return name == o.name && defer == o.defer; }
};

/// Uniform syntax-tree node. Child layout per kind:
///   ModuleRoot   statements
///   FunctionDef  text=name, names=params, decorators, children=body statements
///   Assign       [target, value]
///   AugAssign    text=operator without '=', [target, value]
///   Return       [] or [value]
///   If           [cond, Block then] or [cond, Block then, Block else]
///   While        [cond, Block body]
///   For          [Name target, Call range(...), Block body]
///   ExprStmt     [expr]
///   GlobalDecl / NonlocalDecl   names
///   Delete       [Name]
///   ImportFrom   text=module, names
///   Block        statements
///   Call         [callee, args...]
///   BinOp        text=operator ("+","-","*","/","//","%","and","or"), [lhs, rhs]
///   UnaryOp      text=operator ("-","+","not"), [operand]
///   Compare      text=operator, [lhs, rhs]
///   Name         text=identifier
///   IntLit       text=spelling, intValue
///   RealLit      text=spelling, realValue
///   StringLit    text=decoded contents
///   ListLit      elements
///   Index        [base, index]
///   Attribute    text=attribute, [base]
struct Node {
  NodeKind kind = NodeKind::ModuleRoot;
  SourceSpan span;
  /// Preorder number within the owning tree; stable key for analysis tables.
  int id = -1;
  std::string text;
  std::vector<std::string> names;
  std::vector<Decorator> decorators;
  std::int64_t intValue = 0;
  double realValue = 0.0;
  std::vector<Node> children;

  bool isDynamic() const { return !decorators.empty(); }
  bool isDeferred() const {
    for (const auto& d : decorators)
      if (d.defer) return true;
    return false;
  }
};

/// Assigns preorder ids starting at 0; returns the node count.
int numberNodes(Node& root);

/// Equality ignoring spans and ids.
bool structurallyEqual(const Node& a, const Node& b);

/// Renders a tree back to MiniPy source that parses to a structurally equal
/// tree.
std::string prettyPrint(const Node& root);

/// Indented dump of node kinds and payloads, for tests and debugging.
std::string dumpTree(const Node& root);

}  // namespace microdyn
