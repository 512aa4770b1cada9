#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "microdyn/source.hpp"

namespace microdyn {

enum class TokenKind { Name, Int, Real, String, Op, Newline, Indent, Dedent, EndMarker };

std::string_view tokenKindName(TokenKind kind);

struct Token {
  TokenKind kind;
  /// Source spelling; for strings the decoded contents.
  std::string text;
  SourceSpan span;

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
  bool isOp(std::string_view t) const { return is(TokenKind::Op, t); }
  bool isKeyword(std::string_view t) const { return is(TokenKind::Name, t); }
};

/// Python-style tokenizer: synthesizes INDENT/DEDENT from leading spaces,
/// drops comments and blank lines, joins lines inside brackets. Tabs in
/// indentation are rejected. The stream always ends with ENDMARKER.
std::vector<Token> tokenize(const SourceProgram& src);

}  // namespace microdyn
