#pragma once

#include <set>
#include <string>
#include <vector>

#include "microdyn/ast.hpp"
#include "microdyn/lexer.hpp"

namespace microdyn {

/// The accepted language subset. Anything outside it is rejected by the
/// parser (syntax) or by semantic analysis (builtins).
struct MiniPyGrammarProfile {
  std::set<std::string> statements;
  std::set<std::string> builtins;
  std::set<std::string> numericForms;
  std::set<std::string> binaryOperators;
  std::set<std::string> comparisonOperators;
};

const MiniPyGrammarProfile& grammarProfile();

/// Builds a ModuleRoot from a token stream ending in ENDMARKER. Node ids are
/// assigned in preorder.
Node parse(const std::vector<Token>& tokens);

/// tokenize + parse.
Node parseSource(const SourceProgram& src);

}  // namespace microdyn
