#include "microdyn/lexer.hpp"

#include <array>
#include <cctype>

#include "microdyn/error.hpp"

namespace microdyn {

std::string_view tokenKindName(TokenKind kind) {
  switch (kind) {
    case TokenKind::Name: return "NAME";
    case TokenKind::Int: return "INT";
    case TokenKind::Real: return "REAL";
    case TokenKind::String: return "STRING";
    case TokenKind::Op: return "OP";
    case TokenKind::Newline: return "NEWLINE";
    case TokenKind::Indent: return "INDENT";
    case TokenKind::Dedent: return "DEDENT";
    case TokenKind::EndMarker: return "ENDMARKER";
  }
  return "?";
}

namespace {

bool validUtf8(std::string_view s, std::size_t& badAt) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    int extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c >> 5) == 0x6) {
      extra = 1;
    } else if ((c >> 4) == 0xE) {
      extra = 2;
    } else if ((c >> 3) == 0x1E) {
      extra = 3;
    } else {
      badAt = i;
      return false;
    }
    if (i + static_cast<std::size_t>(extra) >= s.size()) {
      badAt = i;
      return false;
    }
    for (int k = 1; k <= extra; ++k) {
      auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((cc >> 6) != 0x2) {
        badAt = i;
        return false;
      }
    }
    i += static_cast<std::size_t>(extra) + 1;
  }
  return true;
}

// Longest operators first.
constexpr std::array<std::string_view, 33> kOperators = {
    "//=", "**=", ">>=", "<<=", "==", "!=", "<=", ">=", "+=", "-=", "*=",
    "/=",  "%=",  "//",  "**",  "->", "<<", ">>", "(",  ")",  "[",  "]",
    "{",   "}",   ",",   ":",   ".",  ";",  "=",  "+",  "-",  "*",  "/"};
constexpr std::string_view kSingleOps = "%<>@&|^~";

class Lexer {
 public:
  explicit Lexer(const SourceProgram& src) : src_(src), text_(src.body()) {}

  std::vector<Token> run() {
    std::size_t bad = 0;
    if (!validUtf8(text_, bad)) fail(ErrorCode::InvalidCharacter, posAt(bad), "invalid UTF-8");
    indents_.push_back(0);
    while (pos_ < text_.size()) {
      if (atLineStart_ && depth_ == 0) {
        if (handleIndentation()) continue;
      }
      char c = text_[pos_];
      if (c == '\n') {
        if (depth_ == 0 && !atLineStart_) emit(TokenKind::Newline, "\n", pos_, pos_ + 1);
        advanceNewline();
        continue;
      }
      if (c == ' ' || c == '\r') {
        advance();
        continue;
      }
      if (c == '\t') {
        advance();
        continue;
      }
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
        continue;
      }
      if (c == '\\' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') {
        advance();
        advanceNewline();
        atLineStart_ = false;
        continue;
      }
      atLineStart_ = false;
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        lexName();
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < text_.size() &&
                  std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
        lexNumber();
      } else if (c == '"' || c == '\'') {
        lexString();
      } else {
        lexOperator();
      }
    }
    SourcePos end = currentPos();
    if (!atLineStart_) tokens_.push_back({TokenKind::Newline, "", {end, end}});
    SourcePos eof{line_ + (col_ > 1 ? 1 : 0), 1};
    while (indents_.size() > 1) {
      indents_.pop_back();
      tokens_.push_back({TokenKind::Dedent, "", {eof, eof}});
    }
    tokens_.push_back({TokenKind::EndMarker, "", {eof, eof}});
    return std::move(tokens_);
  }

 private:
  SourcePos currentPos() const { return {line_, col_}; }

  SourcePos posAt(std::size_t offset) const {
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < offset && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    return {line, col};
  }

  void advance() {
    ++pos_;
    ++col_;
  }

  void advanceNewline() {
    ++pos_;
    ++line_;
    col_ = 1;
    if (depth_ == 0) atLineStart_ = true;
  }

  // Returns true when the line was blank or comment-only and got consumed.
  bool handleIndentation() {
    std::size_t p = pos_;
    int width = 0;
    while (p < text_.size() && (text_[p] == ' ' || text_[p] == '\t')) {
      if (text_[p] == '\t')
        fail(ErrorCode::TabSpaceMix, {line_, static_cast<int>(p - pos_) + 1},
             "tab in indentation; indent with spaces only");
      ++width;
      ++p;
    }
    if (p < text_.size() && text_[p] == '\r') ++p;
    if (p >= text_.size() || text_[p] == '\n' || text_[p] == '#') {
      while (pos_ < p) advance();
      while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      if (pos_ < text_.size()) advanceNewline();
      return true;
    }
    while (pos_ < p) advance();
    atLineStart_ = false;
    SourcePos here = currentPos();
    if (width > indents_.back()) {
      indents_.push_back(width);
      tokens_.push_back({TokenKind::Indent, std::string(static_cast<std::size_t>(width), ' '),
                         {{line_, 1}, here}});
    } else {
      while (width < indents_.back()) {
        indents_.pop_back();
        tokens_.push_back({TokenKind::Dedent, "", {here, here}});
      }
      if (width != indents_.back())
        fail(ErrorCode::Syntax, here, "unindent does not match any outer indentation level");
    }
    return false;
  }

  void emit(TokenKind kind, std::string text, std::size_t from, std::size_t to) {
    SourcePos b = posAt(from);
    SourcePos e{b.line, b.col + static_cast<int>(to - from)};
    tokens_.push_back({kind, std::move(text), {b, e}});
  }

  void lexName() {
    SourcePos b = currentPos();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      advance();
    tokens_.push_back({TokenKind::Name, text_.substr(start, pos_ - start), {b, currentPos()}});
  }

  void lexNumber() {
    SourcePos b = currentPos();
    std::size_t start = pos_;
    bool real = false;
    auto digits = [&] {
      while (pos_ < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        advance();
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      real = true;
      advance();
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      int saveCol = col_;
      advance();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) advance();
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        real = true;
        digits();
      } else {
        pos_ = save;
        col_ = saveCol;
      }
    }
    if (pos_ < text_.size() &&
        (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      fail(ErrorCode::Syntax, currentPos(), "invalid numeric literal");
    tokens_.push_back({real ? TokenKind::Real : TokenKind::Int, text_.substr(start, pos_ - start),
                       {b, currentPos()}});
  }

  void lexString() {
    SourcePos b = currentPos();
    char quote = text_[pos_];
    advance();
    std::string value;
    while (true) {
      if (pos_ >= text_.size() || text_[pos_] == '\n')
        fail(ErrorCode::UnterminatedString, b, "unterminated string literal");
      char c = text_[pos_];
      if (c == quote) {
        advance();
        break;
      }
      if (c == '\\') {
        advance();
        if (pos_ >= text_.size()) fail(ErrorCode::UnterminatedString, b, "unterminated string literal");
        char e = text_[pos_];
        switch (e) {
          case 'n': value += '\n'; break;
          case 't': value += '\t'; break;
          case '\\': value += '\\'; break;
          case '\'': value += '\''; break;
          case '"': value += '"'; break;
          case '0': value += '\0'; break;
          case '\n':
            advanceNewline();
            atLineStart_ = false;
            continue;
          default:
            value += '\\';
            value += e;
        }
        advance();
        continue;
      }
      value += c;
      advance();
    }
    tokens_.push_back({TokenKind::String, std::move(value), {b, currentPos()}});
  }

  void lexOperator() {
    SourcePos b = currentPos();
    std::string_view rest = std::string_view(text_).substr(pos_);
    for (std::string_view op : kOperators) {
      if (rest.substr(0, op.size()) == op) {
        for (std::size_t i = 0; i < op.size(); ++i) advance();
        if (op == "(" || op == "[" || op == "{") ++depth_;
        if ((op == ")" || op == "]" || op == "}") && depth_ > 0) --depth_;
        tokens_.push_back({TokenKind::Op, std::string(op), {b, currentPos()}});
        return;
      }
    }
    if (kSingleOps.find(rest[0]) != std::string_view::npos) {
      advance();
      tokens_.push_back({TokenKind::Op, std::string(1, rest[0]), {b, currentPos()}});
      return;
    }
    fail(ErrorCode::InvalidCharacter, b, std::string("unexpected character '") + rest[0] + "'");
  }

  const SourceProgram& src_;
  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  int depth_ = 0;
  bool atLineStart_ = true;
  std::vector<int> indents_;
  std::vector<Token> tokens_;
};

}  // namespace

std::vector<Token> tokenize(const SourceProgram& src) { return Lexer(src).run(); }

}  // namespace microdyn
