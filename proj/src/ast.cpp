#include "microdyn/ast.hpp"

#include <cstdio>
#include <sstream>

namespace microdyn {

std::string_view nodeKindName(NodeKind kind) {
  switch (kind) {
    case NodeKind::ModuleRoot: return "ModuleRoot";
    case NodeKind::FunctionDef: return "FunctionDef";
    case NodeKind::Assign: return "Assign";
    case NodeKind::AugAssign: return "AugAssign";
    case NodeKind::Return: return "Return";
    case NodeKind::If: return "If";
    case NodeKind::While: return "While";
    case NodeKind::For: return "For";
    case NodeKind::ExprStmt: return "ExprStmt";
    case NodeKind::GlobalDecl: return "GlobalDecl";
    case NodeKind::NonlocalDecl: return "NonlocalDecl";
    case NodeKind::Delete: return "Delete";
    case NodeKind::ImportFrom: return "ImportFrom";
    case NodeKind::Block: return "Block";
    case NodeKind::Call: return "Call";
    case NodeKind::BinOp: return "BinOp";
    case NodeKind::UnaryOp: return "UnaryOp";
    case NodeKind::Compare: return "Compare";
    case NodeKind::Name: return "Name";
    case NodeKind::IntLit: return "IntLit";
    case NodeKind::RealLit: return "RealLit";
    case NodeKind::StringLit: return "StringLit";
    case NodeKind::ListLit: return "ListLit";
    case NodeKind::Index: return "Index";
    case NodeKind::Attribute: return "Attribute";
  }
  return "?";
}

bool isStatement(NodeKind kind) {
  switch (kind) {
    case NodeKind::FunctionDef:
    case NodeKind::Assign:
    case NodeKind::AugAssign:
    case NodeKind::Return:
    case NodeKind::If:
    case NodeKind::While:
    case NodeKind::For:
    case NodeKind::ExprStmt:
    case NodeKind::GlobalDecl:
    case NodeKind::NonlocalDecl:
    case NodeKind::Delete:
    case NodeKind::ImportFrom:
      return true;
    default:
      return false;
  }
}

namespace {

void numberFrom(Node& n, int& counter) {
  n.id = counter++;
  for (auto& c : n.children) numberFrom(c, counter);
}

int precedence(const Node& n) {
  switch (n.kind) {
    case NodeKind::BinOp:
      if (n.text == "or") return 1;
      if (n.text == "and") return 2;
      if (n.text == "+" || n.text == "-") return 5;
      return 6;
    case NodeKind::UnaryOp:
      return n.text == "not" ? 3 : 7;
    case NodeKind::Compare:
      return 4;
    default:
      return 8;
  }
}

std::string quoteString(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\0': out += "\\0"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string realSpelling(const Node& n) {
  if (!n.text.empty()) return n.text;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", n.realValue);
  std::string s = buf;
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

class Printer {
 public:
  std::string run(const Node& root) {
    for (const auto& s : root.children) statement(s, 0);
    return out_.str();
  }

 private:
  static std::string expr(const Node& n) {
    switch (n.kind) {
      case NodeKind::Name: return n.text;
      case NodeKind::IntLit: return n.text.empty() ? std::to_string(n.intValue) : n.text;
      case NodeKind::RealLit: return realSpelling(n);
      case NodeKind::StringLit: return quoteString(n.text);
      case NodeKind::ListLit: {
        std::string s = "[";
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          if (i) s += ", ";
          s += expr(n.children[i]);
        }
        return s + "]";
      }
      case NodeKind::Call: {
        std::string s = wrap(n.children[0], 8, false) + "(";
        for (std::size_t i = 1; i < n.children.size(); ++i) {
          if (i > 1) s += ", ";
          s += expr(n.children[i]);
        }
        return s + ")";
      }
      case NodeKind::Index:
        return wrap(n.children[0], 8, false) + "[" + expr(n.children[1]) + "]";
      case NodeKind::Attribute:
        return wrap(n.children[0], 8, false) + "." + n.text;
      case NodeKind::UnaryOp:
        if (n.text == "not") return "not " + wrap(n.children[0], 3, false);
        return n.text + wrap(n.children[0], 7, false);
      case NodeKind::BinOp: {
        int p = precedence(n);
        return wrap(n.children[0], p, false) + " " + n.text + " " + wrap(n.children[1], p, true);
      }
      case NodeKind::Compare:
        return wrap(n.children[0], 4, true) + " " + n.text + " " + wrap(n.children[1], 4, true);
      default:
        return "<" + std::string(nodeKindName(n.kind)) + ">";
    }
  }

  // Parenthesizes when the child binds looser than required; `strict` also
  // parenthesizes equal precedence (right operands of left-associative ops).
  static std::string wrap(const Node& child, int required, bool strict) {
    int p = precedence(child);
    bool paren = strict ? p <= required : p < required;
    std::string s = expr(child);
    return paren ? "(" + s + ")" : s;
  }

  void indent(int depth) {
    for (int i = 0; i < depth; ++i) out_ << "    ";
  }

  void block(const Node& b, int depth) {
    for (const auto& s : b.children) statement(s, depth);
  }

  void ifChain(const Node& n, int depth, const char* keyword) {
    indent(depth);
    out_ << keyword << ' ' << expr(n.children[0]) << ":\n";
    block(n.children[1], depth + 1);
    if (n.children.size() < 3) return;
    const Node& elseBlock = n.children[2];
    if (elseBlock.children.size() == 1 && elseBlock.children[0].kind == NodeKind::If) {
      ifChain(elseBlock.children[0], depth, "elif");
    } else {
      indent(depth);
      out_ << "else:\n";
      block(elseBlock, depth + 1);
    }
  }

  static std::string joinNames(const std::vector<std::string>& names) {
    std::string s;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i) s += ", ";
      s += names[i];
    }
    return s;
  }

  void statement(const Node& n, int depth) {
    switch (n.kind) {
      case NodeKind::FunctionDef:
        for (const auto& d : n.decorators) {
          indent(depth);
          out_ << '@' << d.name << (d.defer ? "(defer=True)" : "") << '\n';
        }
        indent(depth);
        out_ << "def " << n.text << '(' << joinNames(n.names) << "):\n";
        for (const auto& s : n.children) statement(s, depth + 1);
        return;
      case NodeKind::If:
        ifChain(n, depth, "if");
        return;
      case NodeKind::While:
        indent(depth);
        out_ << "while " << expr(n.children[0]) << ":\n";
        block(n.children[1], depth + 1);
        return;
      case NodeKind::For:
        indent(depth);
        out_ << "for " << n.children[0].text << " in " << expr(n.children[1]) << ":\n";
        block(n.children[2], depth + 1);
        return;
      case NodeKind::Block:
        block(n, depth);
        return;
      default:
        break;
    }
    indent(depth);
    switch (n.kind) {
      case NodeKind::Assign:
        out_ << expr(n.children[0]) << " = " << expr(n.children[1]);
        break;
      case NodeKind::AugAssign:
        out_ << expr(n.children[0]) << ' ' << n.text << "= " << expr(n.children[1]);
        break;
      case NodeKind::Return:
        out_ << "return";
        if (!n.children.empty()) out_ << ' ' << expr(n.children[0]);
        break;
      case NodeKind::ExprStmt:
        out_ << expr(n.children[0]);
        break;
      case NodeKind::GlobalDecl:
        out_ << "global " << joinNames(n.names);
        break;
      case NodeKind::NonlocalDecl:
        out_ << "nonlocal " << joinNames(n.names);
        break;
      case NodeKind::Delete:
        out_ << "del(" << expr(n.children[0]) << ')';
        break;
      case NodeKind::ImportFrom:
        out_ << "from " << n.text << " import " << joinNames(n.names);
        break;
      default:
        out_ << expr(n);
    }
    out_ << '\n';
  }

  std::ostringstream out_;
};

void dumpNode(const Node& n, int depth, std::ostringstream& out) {
  out << std::string(static_cast<std::size_t>(depth) * 2, ' ') << nodeKindName(n.kind);
  if (!n.text.empty()) out << " '" << n.text << "'";
  for (const auto& nm : n.names) out << " $" << nm;
  for (const auto& d : n.decorators) out << " @" << d.name << (d.defer ? "(defer)" : "");
  out << " [" << n.span.begin.line << ':' << n.span.begin.col << '-' << n.span.end.line << ':'
      << n.span.end.col << "]\n";
  for (const auto& c : n.children) dumpNode(c, depth + 1, out);
}

}  // namespace

int numberNodes(Node& root) {
  int counter = 0;
  numberFrom(root, counter);
  return counter;
}

bool structurallyEqual(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.names != b.names || a.decorators != b.decorators ||
      a.children.size() != b.children.size())
    return false;
  switch (a.kind) {
    case NodeKind::IntLit:
      if (a.intValue != b.intValue) return false;
      break;
    case NodeKind::RealLit:
      if (a.realValue != b.realValue) return false;
      break;
    default:
      if (a.text != b.text) return false;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!structurallyEqual(a.children[i], b.children[i])) return false;
  return true;
}

std::string prettyPrint(const Node& root) { return Printer().run(root); }

std::string dumpTree(const Node& root) {
  std::ostringstream out;
  dumpNode(root, 0, out);
  return out.str();
}

}  // namespace microdyn
