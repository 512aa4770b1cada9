#include "microdyn/parser.hpp"

#include <cerrno>
#include <cstdlib>
#include <initializer_list>

#include "microdyn/error.hpp"

namespace microdyn {

const MiniPyGrammarProfile& grammarProfile() {
  static const MiniPyGrammarProfile profile{
      {"def", "if", "elif", "else", "while", "for", "return", "global", "nonlocal", "del",
       "from-import", "assign", "augassign", "expr"},
      {"print", "len", "load_function", "del", "range", "mark"},
      {"decimal-int", "decimal-real", "exponent-real"},
      {"+", "-", "*", "/", "//", "%", "and", "or"},
      {"<", "<=", ">", ">=", "==", "!="}};
  return profile;
}

namespace {

const std::set<std::string>& unsupportedKeywords() {
  static const std::set<std::string> words{
      "class", "lambda", "try", "except", "finally", "with", "yield", "assert", "raise",
      "import", "pass", "break", "continue", "async", "await", "is", "in", "True",
      "False", "None", "as"};
  return words;
}

const std::set<std::string>& reservedWords() {
  static const std::set<std::string> words{"def",    "if",   "elif", "else", "while",
                                           "for",    "return", "global", "nonlocal", "del",
                                           "from",   "and",  "or",   "not"};
  return words;
}

bool isReserved(const std::string& s) {
  return reservedWords().count(s) > 0 || unsupportedKeywords().count(s) > 0;
}

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {
    if (toks_.empty() || toks_.back().kind != TokenKind::EndMarker)
      fail(ErrorCode::Syntax, {}, "token stream must end with ENDMARKER");
  }

  Node parseModule() {
    Node root;
    root.kind = NodeKind::ModuleRoot;
    root.span.begin = {1, 1};
    while (peek().kind != TokenKind::EndMarker) {
      if (peek().kind == TokenKind::Newline) {
        ++pos_;
        continue;
      }
      if (peek().kind == TokenKind::Indent) fail(ErrorCode::Syntax, peek().span.begin, "unexpected indent");
      if (peek().isKeyword("from")) {
        root.children.push_back(parseImportFrom());
        continue;
      }
      parseStatement(root.children);
    }
    root.span.end = peek().span.end;
    if (!root.children.empty() && root.children.back().span.end > root.span.end)
      root.span.end = root.children.back().span.end;
    return root;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  SourcePos prevEnd() const { return pos_ > 0 ? toks_[pos_ - 1].span.end : SourcePos{1, 1}; }

  [[noreturn]] void expected(std::initializer_list<const char*> what) const {
    std::string msg = "expected one of {";
    bool first = true;
    for (const char* w : what) {
      if (!first) msg += ", ";
      msg += w;
      first = false;
    }
    msg += "}";
    const Token& t = peek();
    if (t.kind == TokenKind::Newline || t.kind == TokenKind::EndMarker)
      msg += " before end of line";
    else
      msg += " near '" + t.text + "'";
    fail(ErrorCode::Syntax, t.span.begin, msg);
  }

  [[noreturn]] void unsupported(const Token& t, const std::string& what) const {
    fail(ErrorCode::UnsupportedFeature, t.span.begin, what + " is not part of the language subset");
  }

  void expectOp(const char* op) {
    if (!peek().isOp(op)) expected({op});
    next();
  }

  std::string expectName() {
    const Token& t = peek();
    if (t.kind != TokenKind::Name) expected({"identifier"});
    if (unsupportedKeywords().count(t.text)) unsupported(t, "'" + t.text + "'");
    if (isReserved(t.text)) expected({"identifier"});
    return next().text;
  }

  void expectNewline() {
    if (peek().kind != TokenKind::Newline) expected({"newline"});
    next();
  }

  static Node makeNode(NodeKind kind, SourcePos begin) {
    Node n;
    n.kind = kind;
    n.span.begin = begin;
    n.span.end = begin;
    return n;
  }

  Node parseImportFrom() {
    Node n = makeNode(NodeKind::ImportFrom, next().span.begin);
    n.text = expectName();
    while (peek().isOp(".")) {
      next();
      n.text += "." + expectName();
    }
    if (!peek().isKeyword("import")) expected({"import"});
    next();
    n.names.push_back(expectName());
    while (peek().isOp(",")) {
      next();
      n.names.push_back(expectName());
    }
    n.span.end = prevEnd();
    expectNewline();
    return n;
  }

  void parseStatement(std::vector<Node>& out) {
    const Token& t = peek();
    if (t.isOp("@") || t.isKeyword("def")) {
      out.push_back(parseFunction());
    } else if (t.isKeyword("if")) {
      out.push_back(parseIf());
    } else if (t.isKeyword("while")) {
      out.push_back(parseWhile());
    } else if (t.isKeyword("for")) {
      out.push_back(parseFor());
    } else if (t.isKeyword("from")) {
      unsupported(t, "nested import");
    } else {
      parseSimpleStatements(out);
    }
  }

  Decorator parseDecorator() {
    Decorator d;
    d.span.begin = next().span.begin;
    const Token& nameTok = peek();
    d.name = expectName();
    if (d.name != "dynamic") unsupported(nameTok, "decorator '@" + d.name + "'");
    if (peek().isOp("(")) {
      next();
      if (!peek().isOp(")")) {
        const Token& kw = peek();
        if (kw.kind != TokenKind::Name || kw.text != "defer") unsupported(kw, "decorator argument");
        next();
        expectOp("=");
        const Token& v = peek();
        if (v.isKeyword("True"))
          d.defer = true;
        else if (v.isKeyword("False"))
          d.defer = false;
        else
          expected({"True", "False"});
        next();
        if (peek().isOp(",")) next();
      }
      expectOp(")");
    }
    d.span.end = prevEnd();
    expectNewline();
    return d;
  }

  Node parseFunction() {
    SourcePos begin = peek().span.begin;
    std::vector<Decorator> decorators;
    while (peek().isOp("@")) decorators.push_back(parseDecorator());
    if (!peek().isKeyword("def")) expected({"def"});
    next();
    Node fn = makeNode(NodeKind::FunctionDef, begin);
    fn.decorators = std::move(decorators);
    fn.text = expectName();
    expectOp("(");
    while (!peek().isOp(")")) {
      const Token& p = peek();
      if (p.isOp("*") || p.isOp("**")) unsupported(p, "variadic parameter");
      fn.names.push_back(expectName());
      if (peek().isOp("=")) unsupported(peek(), "default parameter value");
      if (peek().isOp(":")) unsupported(peek(), "parameter annotation");
      if (!peek().isOp(",")) break;
      next();
    }
    expectOp(")");
    if (peek().isOp("->")) unsupported(peek(), "return annotation");
    expectOp(":");
    parseSuite(fn.children);
    fn.span.end = fn.children.back().span.end;
    return fn;
  }

  void parseSuite(std::vector<Node>& out) {
    if (peek().kind != TokenKind::Newline) {
      parseSimpleStatements(out);
      return;
    }
    next();
    if (peek().kind != TokenKind::Indent) expected({"indented block"});
    next();
    while (peek().kind != TokenKind::Dedent && peek().kind != TokenKind::EndMarker)
      parseStatement(out);
    if (peek().kind == TokenKind::Dedent) next();
  }

  Node parseBlock() {
    Node block = makeNode(NodeKind::Block, peek().span.begin);
    parseSuite(block.children);
    block.span.begin = block.children.front().span.begin;
    block.span.end = block.children.back().span.end;
    return block;
  }

  Node parseIf() {
    Node n = makeNode(NodeKind::If, next().span.begin);
    n.children.push_back(parseExpr());
    expectOp(":");
    n.children.push_back(parseBlock());
    if (peek().isKeyword("elif")) {
      Node elseBlock = makeNode(NodeKind::Block, peek().span.begin);
      elseBlock.children.push_back(parseIf());
      elseBlock.span.end = elseBlock.children.back().span.end;
      n.children.push_back(std::move(elseBlock));
    } else if (peek().isKeyword("else")) {
      next();
      expectOp(":");
      n.children.push_back(parseBlock());
    }
    n.span.end = n.children.back().span.end;
    return n;
  }

  Node parseWhile() {
    Node n = makeNode(NodeKind::While, next().span.begin);
    n.children.push_back(parseExpr());
    expectOp(":");
    n.children.push_back(parseBlock());
    if (peek().isKeyword("else")) unsupported(peek(), "while-else");
    n.span.end = n.children.back().span.end;
    return n;
  }

  Node parseFor() {
    Node n = makeNode(NodeKind::For, next().span.begin);
    const Token& varTok = peek();
    Node target = makeNode(NodeKind::Name, varTok.span.begin);
    target.text = expectName();
    target.span.end = prevEnd();
    if (peek().isOp(",")) unsupported(peek(), "tuple unpacking");
    if (!peek().isKeyword("in")) expected({"in"});
    next();
    Node iter = parseExpr();
    if (iter.kind != NodeKind::Call || iter.children[0].kind != NodeKind::Name ||
        iter.children[0].text != "range")
      fail(ErrorCode::UnsupportedFeature, iter.span.begin, "for loops must iterate over range(...)");
    std::size_t argc = iter.children.size() - 1;
    if (argc < 1 || argc > 3)
      fail(ErrorCode::Syntax, iter.span.begin, "range takes 1 to 3 arguments");
    expectOp(":");
    n.children.push_back(std::move(target));
    n.children.push_back(std::move(iter));
    n.children.push_back(parseBlock());
    if (peek().isKeyword("else")) unsupported(peek(), "for-else");
    n.span.end = n.children.back().span.end;
    return n;
  }

  void parseSimpleStatements(std::vector<Node>& out) {
    while (true) {
      out.push_back(parseSmall());
      if (!peek().isOp(";")) break;
      next();
      if (peek().kind == TokenKind::Newline) break;
    }
    expectNewline();
  }

  Node parseSmall() {
    const Token& t = peek();
    if (t.kind == TokenKind::Name && unsupportedKeywords().count(t.text) &&
        t.text != "True" && t.text != "False" && t.text != "None")
      unsupported(t, "'" + t.text + "' statement");
    if (t.isKeyword("return")) {
      Node n = makeNode(NodeKind::Return, next().span.begin);
      if (peek().kind != TokenKind::Newline && !peek().isOp(";")) n.children.push_back(parseExpr());
      n.span.end = prevEnd();
      return n;
    }
    if (t.isKeyword("global") || t.isKeyword("nonlocal")) {
      Node n = makeNode(t.text == "global" ? NodeKind::GlobalDecl : NodeKind::NonlocalDecl,
                        next().span.begin);
      n.names.push_back(expectName());
      while (peek().isOp(",")) {
        next();
        n.names.push_back(expectName());
      }
      n.span.end = prevEnd();
      return n;
    }
    if (t.isKeyword("del")) {
      Node n = makeNode(NodeKind::Delete, next().span.begin);
      Node target = parseExpr();
      if (peek().isOp(",")) unsupported(peek(), "multi-target del");
      if (target.kind != NodeKind::Name)
        fail(ErrorCode::UnsupportedFeature, target.span.begin, "del target must be a name");
      n.children.push_back(std::move(target));
      n.span.end = prevEnd();
      return n;
    }
    SourcePos begin = t.span.begin;
    Node lhs = parseExpr();
    if (peek().isOp(",")) unsupported(peek(), "tuple");
    if (peek().isOp("=")) {
      requireTarget(lhs);
      next();
      Node value = parseExpr();
      if (peek().isOp("=")) unsupported(peek(), "chained assignment");
      if (peek().isOp(",")) unsupported(peek(), "tuple");
      Node n = makeNode(NodeKind::Assign, begin);
      n.children.push_back(std::move(lhs));
      n.children.push_back(std::move(value));
      n.span.end = prevEnd();
      return n;
    }
    static const std::set<std::string> augOps{"+=", "-=", "*=", "/=", "//=", "%="};
    if (peek().kind == TokenKind::Op && augOps.count(peek().text)) {
      requireTarget(lhs);
      std::string op = next().text;
      op.pop_back();
      Node value = parseExpr();
      Node n = makeNode(NodeKind::AugAssign, begin);
      n.text = op;
      n.children.push_back(std::move(lhs));
      n.children.push_back(std::move(value));
      n.span.end = prevEnd();
      return n;
    }
    if (peek().isOp("**=") || peek().isOp("<<=") || peek().isOp(">>="))
      unsupported(peek(), "operator '" + peek().text + "'");
    Node n = makeNode(NodeKind::ExprStmt, begin);
    n.children.push_back(std::move(lhs));
    n.span.end = prevEnd();
    return n;
  }

  void requireTarget(const Node& lhs) const {
    if (lhs.kind != NodeKind::Name && lhs.kind != NodeKind::Index &&
        lhs.kind != NodeKind::Attribute)
      fail(ErrorCode::Syntax, lhs.span.begin, "cannot assign to expression");
  }

  // Expressions, lowest to highest precedence.
  Node parseExpr() {
    if (peek().isKeyword("lambda")) unsupported(peek(), "lambda");
    Node e = parseOr();
    if (peek().isKeyword("if")) unsupported(peek(), "conditional expression");
    return e;
  }

  Node binary(Node lhs, std::string op, Node rhs, NodeKind kind = NodeKind::BinOp) {
    Node n = makeNode(kind, lhs.span.begin);
    n.text = std::move(op);
    n.span.end = rhs.span.end;
    n.children.push_back(std::move(lhs));
    n.children.push_back(std::move(rhs));
    return n;
  }

  Node parseOr() {
    Node lhs = parseAnd();
    while (peek().isKeyword("or")) {
      next();
      lhs = binary(std::move(lhs), "or", parseAnd());
    }
    return lhs;
  }

  Node parseAnd() {
    Node lhs = parseNot();
    while (peek().isKeyword("and")) {
      next();
      lhs = binary(std::move(lhs), "and", parseNot());
    }
    return lhs;
  }

  Node parseNot() {
    if (peek().isKeyword("not")) {
      Node n = makeNode(NodeKind::UnaryOp, next().span.begin);
      n.text = "not";
      n.children.push_back(parseNot());
      n.span.end = n.children.back().span.end;
      return n;
    }
    return parseComparison();
  }

  bool atComparison() const {
    const Token& t = peek();
    if (t.kind == TokenKind::Op)
      return t.text == "<" || t.text == ">" || t.text == "==" || t.text == "!=" ||
             t.text == "<=" || t.text == ">=";
    return t.isKeyword("in") || t.isKeyword("is") ||
           (t.isKeyword("not") && peek(1).isKeyword("in"));
  }

  Node parseComparison() {
    Node lhs = parseArith();
    if (!atComparison()) return lhs;
    const Token& opTok = peek();
    if (opTok.kind != TokenKind::Op) unsupported(opTok, "'" + opTok.text + "' operator");
    std::string op = next().text;
    Node rhs = parseArith();
    if (atComparison()) unsupported(peek(), "chained comparison");
    return binary(std::move(lhs), std::move(op), std::move(rhs), NodeKind::Compare);
  }

  Node parseArith() {
    Node lhs = parseTerm();
    while (peek().isOp("+") || peek().isOp("-")) {
      std::string op = next().text;
      lhs = binary(std::move(lhs), std::move(op), parseTerm());
    }
    return lhs;
  }

  Node parseTerm() {
    Node lhs = parseFactor();
    while (true) {
      const Token& t = peek();
      if (t.isOp("*") || t.isOp("/") || t.isOp("//") || t.isOp("%")) {
        std::string op = next().text;
        lhs = binary(std::move(lhs), std::move(op), parseFactor());
      } else if (t.isOp("@") || t.isOp("<<") || t.isOp(">>") || t.isOp("&") || t.isOp("|") ||
                 t.isOp("^")) {
        unsupported(t, "operator '" + t.text + "'");
      } else {
        return lhs;
      }
    }
  }

  Node parseFactor() {
    const Token& t = peek();
    if (t.isOp("-") || t.isOp("+")) {
      Node n = makeNode(NodeKind::UnaryOp, next().span.begin);
      n.text = t.text;
      n.children.push_back(parseFactor());
      n.span.end = n.children.back().span.end;
      return n;
    }
    if (t.isOp("~")) unsupported(t, "operator '~'");
    Node base = parsePrimary();
    if (peek().isOp("**")) unsupported(peek(), "operator '**'");
    return base;
  }

  Node parsePrimary() {
    Node e = parseAtom();
    while (true) {
      if (peek().isOp("(")) {
        Node call = makeNode(NodeKind::Call, e.span.begin);
        next();
        call.children.push_back(std::move(e));
        while (!peek().isOp(")")) {
          const Token& a = peek();
          if (a.isOp("*") || a.isOp("**")) unsupported(a, "argument unpacking");
          if (a.kind == TokenKind::Name && peek(1).isOp("=")) unsupported(a, "keyword argument");
          call.children.push_back(parseExpr());
          if (peek().isKeyword("for")) unsupported(peek(), "generator expression");
          if (!peek().isOp(",")) break;
          next();
        }
        expectOp(")");
        call.span.end = prevEnd();
        e = std::move(call);
      } else if (peek().isOp("[")) {
        Node idx = makeNode(NodeKind::Index, e.span.begin);
        next();
        idx.children.push_back(std::move(e));
        if (peek().isOp(":")) unsupported(peek(), "slice");
        idx.children.push_back(parseExpr());
        if (peek().isOp(":")) unsupported(peek(), "slice");
        if (peek().isOp(",")) unsupported(peek(), "multi-dimensional index");
        expectOp("]");
        idx.span.end = prevEnd();
        e = std::move(idx);
      } else if (peek().isOp(".")) {
        Node attr = makeNode(NodeKind::Attribute, e.span.begin);
        next();
        attr.children.push_back(std::move(e));
        attr.text = expectName();
        attr.span.end = prevEnd();
        e = std::move(attr);
      } else {
        return e;
      }
    }
  }

  Node parseAtom() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Name: {
        if (unsupportedKeywords().count(t.text)) unsupported(t, "'" + t.text + "'");
        if (isReserved(t.text)) expected({"expression"});
        Node n = makeNode(NodeKind::Name, t.span.begin);
        n.text = t.text;
        n.span.end = t.span.end;
        next();
        return n;
      }
      case TokenKind::Int: {
        Node n = makeNode(NodeKind::IntLit, t.span.begin);
        n.text = t.text;
        n.span.end = t.span.end;
        std::string digits;
        for (char c : t.text)
          if (c != '_') digits += c;
        if (digits.size() > 1 && digits[0] == '0' && digits.find_first_not_of('0') != std::string::npos)
          fail(ErrorCode::Syntax, t.span.begin, "leading zeros in decimal integer literal");
        errno = 0;
        char* end = nullptr;
        unsigned long long v = std::strtoull(digits.c_str(), &end, 10);
        if (errno == ERANGE || v > static_cast<unsigned long long>(INT64_MAX))
          unsupported(t, "integer literal outside 64-bit range");
        n.intValue = static_cast<std::int64_t>(v);
        next();
        return n;
      }
      case TokenKind::Real: {
        Node n = makeNode(NodeKind::RealLit, t.span.begin);
        n.text = t.text;
        n.span.end = t.span.end;
        std::string digits;
        for (char c : t.text)
          if (c != '_') digits += c;
        n.realValue = std::strtod(digits.c_str(), nullptr);
        next();
        return n;
      }
      case TokenKind::String: {
        Node n = makeNode(NodeKind::StringLit, t.span.begin);
        n.text = t.text;
        n.span.end = t.span.end;
        next();
        while (peek().kind == TokenKind::String) {
          n.text += peek().text;
          n.span.end = peek().span.end;
          next();
        }
        return n;
      }
      case TokenKind::Op:
        if (t.isOp("(")) {
          next();
          if (peek().isOp(")")) unsupported(peek(), "tuple");
          Node inner = parseExpr();
          if (peek().isOp(",")) unsupported(peek(), "tuple");
          if (peek().isKeyword("for")) unsupported(peek(), "generator expression");
          expectOp(")");
          return inner;
        }
        if (t.isOp("[")) {
          Node list = makeNode(NodeKind::ListLit, next().span.begin);
          while (!peek().isOp("]")) {
            list.children.push_back(parseExpr());
            if (peek().isKeyword("for")) unsupported(peek(), "list comprehension");
            if (!peek().isOp(",")) break;
            next();
          }
          expectOp("]");
          list.span.end = prevEnd();
          return list;
        }
        if (t.isOp("{")) unsupported(t, "dict or set display");
        break;
      default:
        break;
    }
    expected({"expression"});
  }

  const std::vector<Token>& toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Node parse(const std::vector<Token>& tokens) {
  Node root = Parser(tokens).parseModule();
  numberNodes(root);
  return root;
}

Node parseSource(const SourceProgram& src) { return parse(tokenize(src)); }

}  // namespace microdyn
