#include <gtest/gtest.h>

#include <functional>
#include <map>

#include "microdyn/error.hpp"
#include "microdyn/lexer.hpp"
#include "microdyn/parser.hpp"
#include "test_util.hpp"

using namespace microdyn;

namespace {

std::vector<Token> lex(const std::string& text) { return tokenize(SourceProgram("t.py", text)); }
Node parseText(const std::string& text) { return parseSource(SourceProgram("t.py", text)); }

ErrorCode errorOf(const std::function<void()>& fn, SourcePos* pos = nullptr) {
  try {
    fn();
  } catch (const CompileError& e) {
    if (pos) *pos = e.pos();
    return e.code();
  }
  ADD_FAILURE() << "expected a CompileError";
  return ErrorCode::Io;
}

std::string kinds(const std::vector<Token>& toks) {
  std::string s;
  for (const auto& t : toks) {
    if (!s.empty()) s += ' ';
    s += std::string(tokenKindName(t.kind));
    if (!t.text.empty() && t.kind != TokenKind::Newline && t.kind != TokenKind::Indent)
      s += "(" + t.text + ")";
  }
  return s;
}

void expectSpansNested(const Node& n) {
  for (const auto& c : n.children) {
    EXPECT_TRUE(n.span.contains(c.span))
        << nodeKindName(n.kind) << " does not contain " << nodeKindName(c.kind) << " at "
        << c.span.begin.line << ":" << c.span.begin.col;
    EXPECT_GE(c.span.begin.line, 1);
    expectSpansNested(c);
  }
}

}  // namespace

TEST(Lexer, MinimalStatement) {
  EXPECT_EQ(kinds(lex("x = 1\n")), "NAME(x) OP(=) INT(1) NEWLINE ENDMARKER");
}

TEST(Lexer, SingleBlockHasOneIndentAndDedent) {
  auto toks = lex("def f():\n  return 1\n");
  int indents = 0, dedents = 0;
  for (const auto& t : toks) {
    indents += t.kind == TokenKind::Indent;
    dedents += t.kind == TokenKind::Dedent;
  }
  EXPECT_EQ(indents, 1);
  EXPECT_EQ(dedents, 1);
}

TEST(Lexer, CommentsAndBlankLinesVanish) {
  EXPECT_EQ(kinds(lex("# c\n\nx = 1 # trailing\n   \n# end")),
            "NAME(x) OP(=) INT(1) NEWLINE ENDMARKER");
}

TEST(Lexer, MissingFinalNewlineIsSynthesized) {
  EXPECT_EQ(kinds(lex("x")), "NAME(x) NEWLINE ENDMARKER");
}

TEST(Lexer, BracketsJoinLines) {
  EXPECT_EQ(kinds(lex("f(1,\n      2)\n")), "NAME(f) OP(() INT(1) OP(,) INT(2) OP()) NEWLINE ENDMARKER");
}

TEST(Lexer, NumericForms) {
  auto toks = lex("1 2.5 .5 1e3 1.5e-05 10_000\n");
  std::vector<TokenKind> expected{TokenKind::Int, TokenKind::Real, TokenKind::Real,
                                  TokenKind::Real, TokenKind::Real, TokenKind::Int};
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(toks[i].kind, expected[i]) << i;
}

TEST(Lexer, StringEscapes) {
  auto toks = lex("'a\\tb' \"q\\\"\"\n");
  EXPECT_EQ(toks[0].text, "a\tb");
  EXPECT_EQ(toks[1].text, "q\"");
}

TEST(Lexer, TabInIndentationIsRejected) {
  SourcePos pos;
  EXPECT_EQ(errorOf([] { lex("if x:\n\ty = 1\n"); }, &pos), ErrorCode::TabSpaceMix);
  EXPECT_EQ(pos.line, 2);
}

TEST(Lexer, UnterminatedString) {
  SourcePos pos;
  EXPECT_EQ(errorOf([] { lex("x = 'abc\ny = 2\n"); }, &pos), ErrorCode::UnterminatedString);
  EXPECT_EQ(pos, (SourcePos{1, 5}));
}

TEST(Lexer, InconsistentDedent) {
  EXPECT_EQ(errorOf([] { lex("if x:\n    a = 1\n  b = 2\n"); }), ErrorCode::Syntax);
}

TEST(Lexer, InvalidUtf8) {
  EXPECT_EQ(errorOf([] { lex(std::string("x = 1\xff\n")); }), ErrorCode::InvalidCharacter);
}

TEST(Lexer, ColumnsAreOneBased) {
  auto toks = lex("ab = 12\n");
  EXPECT_EQ(toks[0].span.begin, (SourcePos{1, 1}));
  EXPECT_EQ(toks[1].span.begin, (SourcePos{1, 4}));
  EXPECT_EQ(toks[2].span.begin, (SourcePos{1, 6}));
}

// Counts from CPython's tokenize module over bench/jacobi.py, ignoring
// ENCODING, COMMENT and NL tokens (NUMBER covers INT and REAL).
TEST(Lexer, JacobiTokenCountMatchesReferenceTokenizer) {
  auto src = SourceProgram::fromFile(testutil::sourceDir() / "bench" / "jacobi.py");
  auto toks = tokenize(src);
  std::map<std::string, int> counts;
  for (const auto& t : toks) {
    std::string k(tokenKindName(t.kind));
    if (k == "INT" || k == "REAL") k = "NUMBER";
    counts[k]++;
  }
  EXPECT_EQ(toks.size(), 321u);
  EXPECT_EQ(counts["OP"], 128);
  EXPECT_EQ(counts["NAME"], 110);
  EXPECT_EQ(counts["NEWLINE"], 36);
  EXPECT_EQ(counts["NUMBER"], 24);
  EXPECT_EQ(counts["INDENT"], 10);
  EXPECT_EQ(counts["DEDENT"], 10);
  EXPECT_EQ(counts["STRING"], 2);
  EXPECT_EQ(counts["ENDMARKER"], 1);
}

TEST(Parser, Listing6Decorators) {
  Node root = parseSource(SourceProgram::fromFile(testutil::sourceDir() / "corpus" / "listing6.py"));
  std::vector<const Node*> fns;
  for (const auto& s : root.children)
    if (s.kind == NodeKind::FunctionDef) fns.push_back(&s);
  ASSERT_EQ(fns.size(), 2u);
  EXPECT_EQ(fns[0]->text, "add");
  EXPECT_TRUE(fns[0]->isDynamic());
  EXPECT_TRUE(fns[0]->isDeferred());
  EXPECT_EQ(fns[1]->text, "add_nums");
  EXPECT_TRUE(fns[1]->isDynamic());
  EXPECT_FALSE(fns[1]->isDeferred());
  EXPECT_EQ(root.children.front().kind, NodeKind::ImportFrom);
}

TEST(Parser, TruncatedAssignment) {
  SourcePos pos;
  EXPECT_EQ(errorOf([] { parseText("x ="); }, &pos), ErrorCode::Syntax);
  EXPECT_EQ(pos, (SourcePos{1, 4}));
}

TEST(Parser, SyntaxErrorListsExpectedSet) {
  try {
    parseText("def f(:\n  return 1\n");
    FAIL();
  } catch (const CompileError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Syntax);
    EXPECT_NE(std::string(e.what()).find("expected one of"), std::string::npos);
  }
}

TEST(Parser, UnsupportedConstructs) {
  for (const char* text :
       {"class A:\n  x = 1\n", "y = [i for i in range(3)]\n", "x = lambda: 1\n",
        "for x in y:\n  z = 1\n", "import os\n", "x = True\n", "a, b = 1, 2\n",
        "f(x=1)\n", "x = {1: 2}\n", "x = 2 ** 3\n", "while 1:\n  break\n", "a < b < c\n",
        "@other\ndef f():\n  return 1\n", "@dynamic(fast=True)\ndef f():\n  return 1\n",
        "def f(x=1):\n  return x\n", "x = y[1:2]\n", "a = b = 1\n"}) {
    EXPECT_EQ(errorOf([&] { parseText(text); }), ErrorCode::UnsupportedFeature) << text;
  }
}

TEST(Parser, PrecedenceShapesTree) {
  Node root = parseText("x = 1 + 2 * 3 - -4\n");
  const Node& v = root.children[0].children[1];
  ASSERT_EQ(v.kind, NodeKind::BinOp);
  EXPECT_EQ(v.text, "-");
  EXPECT_EQ(v.children[0].text, "+");
  EXPECT_EQ(v.children[0].children[1].text, "*");
  EXPECT_EQ(v.children[1].kind, NodeKind::UnaryOp);
}

TEST(Parser, ElifBecomesNestedIf) {
  Node root = parseText("if a:\n  x = 1\nelif b:\n  x = 2\nelse:\n  x = 3\n");
  const Node& outer = root.children[0];
  ASSERT_EQ(outer.children.size(), 3u);
  ASSERT_EQ(outer.children[2].kind, NodeKind::Block);
  EXPECT_EQ(outer.children[2].children[0].kind, NodeKind::If);
}

TEST(Parser, ForRange) {
  Node root = parseText("for i in range(1, 10, 2):\n  print(i)\n");
  const Node& f = root.children[0];
  ASSERT_EQ(f.kind, NodeKind::For);
  EXPECT_EQ(f.children[0].text, "i");
  EXPECT_EQ(f.children[1].children.size(), 4u);
}

TEST(Parser, DeterministicAndSpansNested) {
  for (const auto& path : testutil::corpusFiles()) {
    auto src = SourceProgram::fromFile(path);
    Node a = parseSource(src);
    Node b = parseSource(src);
    EXPECT_TRUE(structurallyEqual(a, b)) << path;
    EXPECT_EQ(dumpTree(a), dumpTree(b)) << path;
    expectSpansNested(a);
  }
}

TEST(Parser, CorpusRoundTrip) {
  auto files = testutil::corpusFiles();
  ASSERT_GE(files.size(), 20u);
  for (const auto& path : files) {
    Node original = parseSource(SourceProgram::fromFile(path));
    std::string once = prettyPrint(original);
    Node reparsed = parseSource(SourceProgram("rt.py", once));
    EXPECT_TRUE(structurallyEqual(original, reparsed)) << path << "\n" << once;
    EXPECT_EQ(prettyPrint(reparsed), once) << path;
  }
}

TEST(Parser, RoundTripKeepsParenthesizedStructure) {
  Node a = parseText("x = (a - (b - c)) * -(d + e)\ny = not (p and q) or r\nz = (f(1))[2]\n");
  Node b = parseText(prettyPrint(a));
  EXPECT_TRUE(structurallyEqual(a, b)) << prettyPrint(a);
}

TEST(Parser, ProfileListsBuiltins) {
  const auto& p = grammarProfile();
  for (const char* b : {"print", "len", "load_function", "del"}) EXPECT_TRUE(p.builtins.count(b)) << b;
}
