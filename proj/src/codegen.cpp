#include "microdyn/codegen.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "microdyn/error.hpp"
#include "microdyn/numeric.hpp"

namespace microdyn {

std::string mangledName(int function) { return "oly_e" + std::to_string(function + 1); }

namespace {

std::string ctype(Kind k) {
  switch (k) {
    case Kind::Int: return "Int";
    case Kind::Real: return "Real";
    case Kind::Complex: return "Complex";
    case Kind::Vector: return "Vector";
    case Kind::Proc: return "Proc";
    case Kind::Object: return "Object";
    case Kind::Str: return "Str";
  }
  return "Int";
}

std::string suffix(Kind k) {
  switch (k) {
    case Kind::Int: return "int";
    case Kind::Real: return "real";
    case Kind::Complex: return "complex";
    case Kind::Vector: return "vector";
    case Kind::Proc: return "proc";
    case Kind::Object: return "object";
    case Kind::Str: return "str";
  }
  return "int";
}

char letter(Kind k) {
  switch (k) {
    case Kind::Int: return 'I';
    case Kind::Real: return 'R';
    case Kind::Complex: return 'C';
    case Kind::Vector: return 'V';
    case Kind::Proc: return 'P';
    case Kind::Object: return 'O';
    case Kind::Str: return 'S';
  }
  return 'I';
}

std::string cStringLiteral(const std::string& s) {
  std::string out = "\"";
  for (unsigned char c : s) {
    if (c == '"' || c == '\\' || c == '?') {
      out += '\\';
      out += static_cast<char>(c);
    } else if (c >= 0x20 && c < 0x7f) {
      out += static_cast<char>(c);
    } else {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\%03o", c);
      out += buf;
    }
  }
  return out + "\"";
}

std::string hexWord(std::uint64_t w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016llxULL", static_cast<unsigned long long>(w));
  return buf;
}

/// NUL-terminated text packed little-endian into 64-bit words.
std::vector<std::uint64_t> packWords(const std::string& s) {
  std::vector<std::uint64_t> words((s.size() + 8) / 8, 0);
  for (std::size_t i = 0; i < s.size(); ++i)
    words[i / 8] |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * (i % 8));
  return words;
}

std::string stripOuterParens(const std::string& s) {
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') return s;
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') --depth;
    if (depth == 0 && i + 1 < s.size()) return s;
  }
  return s.substr(1, s.size() - 2);
}

struct Piece {
  std::string text;
  Kind kind = Kind::Int;
  bool effectful = false;
  bool literal = false;
  /// C type narrower than Int (plain int literals, comparison results).
  bool narrow = false;
};

class Emitter {
 public:
  /// `unitTop` is the entry function of a dynamic unit, -1 for the resident unit.
  Emitter(const ProgramAnalysis& a, int unitTop) : a_(a), unitTop_(unitTop), dynamic_(unitTop >= 0) {}

  int unitOf(int fn) const {
    int top = a_.functions[static_cast<std::size_t>(fn)].topLevel;
    return a_.functions[static_cast<std::size_t>(top)].dispatch == DispatchMode::DynamicLoad ? top : -1;
  }

  /// Definition without storage class; only a dynamic unit's entry is external.
  std::string function(int fn) {
    const FunctionInfo& f = a_.functions[static_cast<std::size_t>(fn)];
    const Node& def = *node(f.node);
    begin(fn, f.depth);
    statements(def.children);
    bool endsInReturn = !def.children.empty() && def.children.back().kind == NodeKind::Return;
    if (!endsInReturn) line("return 0;");
    return signature(fn) + " {\n" + finish() + "}\n";
  }

  std::string module() {
    begin(-1, 0);
    statements(a_.ast.children);
    return "static void oly_module(Env env) {\n" + finish() + "}\n";
  }

  std::string signature(int fn) const {
    return ctype(returnKind(fn)) + " " + mangledName(fn) + "(Env env, Object self)";
  }

  std::string helperText() const {
    std::string out;
    for (const auto& [name, text] : helpers_) out += text;
    return out;
  }

  std::string expression(const Node& n, int fn, int depth) {
    begin(fn, depth);
    return expr(n).text;
  }

  std::string declaration(int fn, int depth) {
    begin(a_.functions[static_cast<std::size_t>(fn)].parentScope == 0 ? -1 : scopeFunction(fn), depth);
    declare(fn);
    return finish(false);
  }

  std::string deletion(const Node& del) {
    int scope = a_.nodeScope[static_cast<std::size_t>(del.id)];
    begin(a_.scopes[static_cast<std::size_t>(scope)].function, a_.scopes[static_cast<std::size_t>(scope)].depth);
    statement(del);
    return finish(false);
  }

 private:
  int scopeFunction(int fn) const {
    return a_.scopes[static_cast<std::size_t>(a_.functions[static_cast<std::size_t>(fn)].parentScope)].function;
  }

  Kind returnKind(int fn) const {
    const FunctionInfo& f = a_.functions[static_cast<std::size_t>(fn)];
    return f.returnsValue ? f.returnKind : Kind::Int;
  }

  const Node* node(int id) const {
    std::vector<const Node*> stack{&a_.ast};
    while (!stack.empty()) {
      const Node* n = stack.back();
      stack.pop_back();
      if (n->id == id) return n;
      for (const auto& c : n->children) stack.push_back(&c);
    }
    throw std::logic_error("node not found");
  }

  // ---- body state ----------------------------------------------------

  void begin(int fn, int depth) {
    fn_ = fn;
    depth_ = depth;
    temps_.clear();
    body_.clear();
    indent_ = 1;
  }

  std::string finish(bool withTemps = true) {
    std::string decls;
    if (withTemps)
      for (std::size_t i = 0; i < temps_.size(); ++i)
        decls += "  " + temps_[i] + " oly_t" + std::to_string(i + 1) + ";\n";
    return decls + body_;
  }

  void line(const std::string& text) { body_ += std::string(static_cast<std::size_t>(indent_) * 2, ' ') + text + "\n"; }

  std::string temp(Kind k) {
    temps_.push_back(ctype(k));
    return "oly_t" + std::to_string(temps_.size());
  }

  // Operands evaluate left to right: everything up to the last effectful
  // operand is captured in temporaries unless it is a literal.
  std::vector<std::string> sequence(std::vector<Piece>& ops) {
    int last = -1;
    for (std::size_t i = 0; i < ops.size(); ++i)
      if (ops[i].effectful) last = static_cast<int>(i);
    std::vector<std::string> assigns;
    if (last < 0) return assigns;
    bool laterNonLiteral = false;
    for (std::size_t i = static_cast<std::size_t>(last) + 1; i < ops.size(); ++i)
      laterNonLiteral = laterNonLiteral || !ops[i].literal;
    for (int i = 0; i <= last; ++i) {
      Piece& p = ops[static_cast<std::size_t>(i)];
      if (p.literal || (i == last && !laterNonLiteral)) continue;
      std::string t = temp(p.kind);
      assigns.push_back(t + " = " + p.text);
      p.text = t;
      p.narrow = false;
    }
    return assigns;
  }

  static std::string wrapSequence(const std::vector<std::string>& assigns, const std::string& text) {
    if (assigns.empty()) return text;
    std::string out = "(";
    for (const auto& s : assigns) out += s + ", ";
    return out + text + ")";
  }

  void emitAssigns(const std::vector<std::string>& assigns) {
    for (const auto& s : assigns) line(s + ";");
  }

  // ---- expressions ---------------------------------------------------

  std::string access(const ResolvedRef& r) const {
    return "(env," + std::to_string(r.relLevel) + "," + std::to_string(r.offset);
  }

  std::string realLiteral(double v) {
    if (dynamic_ || !std::isfinite(v)) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      return "oly_real_bits(" + hexWord(bits) + ")";
    }
    return formatReal(v);
  }

  std::string strLiteral(const std::string& s) {
    if (!dynamic_) return cStringLiteral(s);
    std::string out = "oly_intern(env,(const UInt[]){";
    auto words = packWords(s);
    for (std::size_t i = 0; i < words.size(); ++i) out += (i ? "," : "") + std::string("oly_word(") + hexWord(words[i]) + ")";
    return out + "})";
  }

  std::string truth(const std::string& text, Kind k) const {
    switch (k) {
      case Kind::Real: return "(" + text + " != 0)";
      case Kind::Str: return "(*" + text + " != 0)";
      case Kind::Vector: return "(oly_len(" + text + ") != 0)";
      case Kind::Proc:
      case Kind::Complex:
      case Kind::Object: return "(" + text + " != 0)";
      case Kind::Int: return text;
    }
    return text;
  }

  Kind kindOf(const Node& n) const { return a_.expr(n).kind; }

  Piece binary(const std::string& op, Piece l, Piece r, Kind result) {
    std::vector<Piece> ops{l, r};
    auto assigns = sequence(ops);
    l = ops[0];
    r = ops[1];
    Piece out;
    out.kind = result;
    out.effectful = l.effectful || r.effectful;
    if (op == "/") {
      auto asReal = [](const Piece& p) { return p.kind == Kind::Real ? p.text : "(Real)" + p.text; };
      out.text = "oly_truediv(env," + asReal(l) + "," + asReal(r) + ")";
    } else if (op == "//") {
      out.text = "oly_floordiv(env," + l.text + "," + r.text + ")";
    } else if (op == "%") {
      out.text = "oly_mod(env," + l.text + "," + r.text + ")";
    } else {
      std::string left = l.text;
      if (result == Kind::Int && l.narrow && r.narrow) left = "(Int)" + left;
      out.text = "(" + left + " " + op + " " + r.text + ")";
    }
    out.text = wrapSequence(assigns, out.text);
    return out;
  }

  Piece expr(const Node& n) {
    Piece p;
    p.kind = kindOf(n);
    switch (n.kind) {
      case NodeKind::IntLit:
        p.text = std::to_string(n.intValue);
        p.literal = true;
        p.narrow = n.intValue <= std::numeric_limits<std::int32_t>::max();
        p.kind = Kind::Int;
        return p;
      case NodeKind::RealLit:
        p.text = realLiteral(n.realValue);
        p.literal = true;
        p.kind = Kind::Real;
        return p;
      case NodeKind::StringLit:
        p.text = strLiteral(n.text);
        p.literal = !dynamic_;
        p.kind = Kind::Str;
        return p;
      case NodeKind::Name: {
        const ResolvedRef& r = a_.ref(n);
        p.kind = r.kind;
        p.text = "lookup_" + suffix(r.kind) + access(r) + ")";
        return p;
      }
      case NodeKind::BinOp:
        return binOp(n);
      case NodeKind::UnaryOp: {
        Piece v = expr(n.children[0]);
        p.effectful = v.effectful;
        if (n.text == "not") {
          p.text = "(!" + truth(v.text, v.kind) + ")";
          p.narrow = true;
          return p;
        }
        if (n.text == "+") return v;
        if (v.kind == Kind::Real && dynamic_)
          p.text = "oly_neg_real(" + v.text + ")";
        else
          p.text = "(-" + v.text + ")";
        p.narrow = v.narrow;
        p.literal = v.literal && !dynamic_;
        return p;
      }
      case NodeKind::Compare: {
        std::vector<Piece> ops{expr(n.children[0]), expr(n.children[1])};
        auto assigns = sequence(ops);
        p.effectful = ops[0].effectful || ops[1].effectful;
        p.text = wrapSequence(assigns, "(" + ops[0].text + " " + n.text + " " + ops[1].text + ")");
        p.narrow = true;
        return p;
      }
      case NodeKind::Index: {
        std::vector<Piece> ops{expr(n.children[0]), expr(n.children[1])};
        auto assigns = sequence(ops);
        Kind elem = a_.expr(n.children[0]).elemKind;
        p.effectful = ops[0].effectful || ops[1].effectful;
        p.text = wrapSequence(assigns, "vector_lookup_" + suffix(elem) + "(" + ops[0].text + "," + ops[1].text + ")");
        return p;
      }
      case NodeKind::Attribute: {
        Piece b = expr(n.children[0]);
        p.effectful = b.effectful;
        p.text = "complex_" + n.text + "(" + b.text + ")";
        return p;
      }
      case NodeKind::ListLit:
        return listLiteral(n);
      case NodeKind::Call:
        return call(n);
      default:
        throw std::logic_error("unexpected expression node");
    }
  }

  Piece binOp(const Node& n) {
    Piece p;
    p.kind = kindOf(n);
    auto isRepeat = [](const Node& c) { return c.kind == NodeKind::ListLit && c.children.size() == 1; };
    if (n.text == "*" && (isRepeat(n.children[0]) || isRepeat(n.children[1]))) {
      bool leftList = isRepeat(n.children[0]);
      Kind elem = a_.expr(n).elemKind;
      std::vector<Piece> ops{expr(leftList ? n.children[0].children[0] : n.children[0]),
                             expr(leftList ? n.children[1] : n.children[1].children[0])};
      auto assigns = sequence(ops);
      const Piece& value = leftList ? ops[0] : ops[1];
      const Piece& count = leftList ? ops[1] : ops[0];
      p.effectful = ops[0].effectful || ops[1].effectful;
      p.text = wrapSequence(assigns, "oly_vector_fill_" + suffix(elem) + "(env," + count.text + "," + value.text + ")");
      return p;
    }
    if (n.text == "and" || n.text == "or") {
      Piece l = expr(n.children[0]);
      Piece r = expr(n.children[1]);
      std::string t = temp(p.kind);
      std::string test = truth(t, p.kind);
      p.text = n.text == "or" ? "(" + t + " = " + l.text + ", " + test + " ? " + t + " : " + r.text + ")"
                              : "(" + t + " = " + l.text + ", " + test + " ? " + r.text + " : " + t + ")";
      p.effectful = l.effectful || r.effectful;
      return p;
    }
    return binary(n.text, expr(n.children[0]), expr(n.children[1]), p.kind);
  }

  Piece listLiteral(const Node& n) {
    Piece p;
    p.kind = Kind::Vector;
    Kind elem = a_.expr(n).elemKind;
    if (n.children.empty()) {
      p.text = "OLY_API(env)->vector_fill(OLY_CTX(env),0," + std::string(elem == Kind::Real ? "OLY_ELEM_REAL" : "OLY_ELEM_INT") + ",0)";
      p.effectful = false;
      return p;
    }
    std::vector<Piece> ops;
    for (const auto& c : n.children) ops.push_back(expr(c));
    auto assigns = sequence(ops);
    std::size_t count = ops.size();
    std::string name = std::string("oly_list_") + (elem == Kind::Real ? "r" : "i") + std::to_string(count);
    if (!helpers_.count(name)) {
      std::string t = ctype(elem);
      std::string text = "OLY_INLINE Vector " + name + "(Env env";
      for (std::size_t i = 0; i < count; ++i) text += ", " + t + " a" + std::to_string(i);
      text += ") {\n  Vector v = OLY_API(env)->vector_fill(OLY_CTX(env), " + std::to_string(count) + ", " +
              (elem == Kind::Real ? "OLY_ELEM_REAL" : "OLY_ELEM_INT") + ", 0);\n";
      for (std::size_t i = 0; i < count; ++i)
        text += "  ((" + t + " *)v->data)[" + std::to_string(i) + "] = a" + std::to_string(i) + ";\n";
      text += "  return v;\n}\n";
      helpers_[name] = text;
    }
    p.text = name + "(env";
    for (const auto& o : ops) {
      p.text += "," + o.text;
      p.effectful = p.effectful || o.effectful;
    }
    p.text = wrapSequence(assigns, p.text + ")");
    return p;
  }

  bool staticCallee(const Node& callee, int& target) const {
    if (callee.kind != NodeKind::Name) return false;
    const ResolvedRef& r = a_.ref(callee);
    const SymbolEntry& s = a_.symbols[static_cast<std::size_t>(r.symbol)];
    if (s.defFunction < 0 || s.otherBindings != 0 || s.deleted) return false;
    const FunctionInfo& f = a_.functions[static_cast<std::size_t>(s.defFunction)];
    if (f.dispatch != DispatchMode::StaticDispatch || unitOf(f.index) != unitTop_) return false;
    target = f.index;
    return true;
  }

  Piece call(const Node& n) {
    Piece p;
    p.kind = kindOf(n);
    CallTarget target = a_.callTargets.at(n.id);
    if (target == CallTarget::Len) {
      Piece v = expr(n.children[1]);
      p.effectful = v.effectful;
      p.text = "oly_len(" + v.text + ")";
      return p;
    }
    if (target == CallTarget::LoadFunction) {
      int fn = a_.loadTargets.at(n.id);
      const FunctionInfo& f = a_.functions[static_cast<std::size_t>(fn)];
      std::string argc = std::to_string(a_.frameOf(fn).argCount);
      p.kind = Kind::Proc;
      p.effectful = true;
      if (f.dispatch == DispatchMode::DynamicLoad)
        p.text = "load_proc(" + cStringLiteral(f.name) + ",env," + argc + ")";
      else
        p.text = "mk_proc(" + mangledName(fn) + "," + (depth_ == 0 ? "env" : "OLY_CTX(env)->display_top") + "," +
                 argc + ")";
      return p;
    }
    if (target != CallTarget::User) throw std::logic_error("value-less builtin in expression position");

    p.effectful = true;
    int staticTarget = -1;
    if (staticCallee(n.children[0], staticTarget)) {
      std::vector<Piece> ops;
      for (std::size_t i = 1; i < n.children.size(); ++i) ops.push_back(expr(n.children[i]));
      auto assigns = sequence(ops);
      std::string name = staticHelper(staticTarget);
      std::string text = name + "(env";
      for (const auto& o : ops) text += "," + o.text;
      p.kind = returnKind(staticTarget);
      p.text = wrapSequence(assigns, text + ")");
      return p;
    }
    std::vector<Piece> ops{expr(n.children[0])};
    for (std::size_t i = 1; i < n.children.size(); ++i) ops.push_back(expr(n.children[i]));
    auto assigns = sequence(ops);
    const ProcSignature& sig = a_.procClasses.at(a_.expr(n.children[0]).procClass);
    Kind ret = sig.returnsValue ? sig.ret : Kind::Int;
    std::string name = callHelper(sig);
    std::string text = name + "(env";
    for (const auto& o : ops) text += "," + o.text;
    p.kind = ret;
    p.text = wrapSequence(assigns, text + ")");
    return p;
  }

  std::string callHelper(const ProcSignature& sig) {
    Kind ret = sig.returnsValue ? sig.ret : Kind::Int;
    std::string name = std::string("oly_call_") + letter(ret) + "_";
    for (Kind k : sig.params) name += letter(k);
    if (sig.params.empty()) name += 'N';
    if (helpers_.count(name)) return name;
    std::string text = "OLY_INLINE " + ctype(ret) + " " + name + "(Env env, Proc p";
    for (std::size_t i = 0; i < sig.params.size(); ++i) text += ", " + ctype(sig.params[i]) + " a" + std::to_string(i);
    text += ") {\n  Env ce;\n  void **base = oly_call_begin(env, p, &ce);\n";
    for (std::size_t i = 0; i < sig.params.size(); ++i)
      text += "  ((" + ctype(sig.params[i]) + " *)base)[" + std::to_string(i) + "] = a" + std::to_string(i) + ";\n";
    text += "  " + ctype(ret) + " r = ((" + ctype(ret) + " (*)(Env, Object))p->entry)(ce, (Object)p);\n";
    text += "  oly_call_end(ce, p, base);\n  return r;\n}\n";
    helpers_[name] = text;
    return name;
  }

  std::string staticHelper(int fn) {
    std::string name = "oly_scall_" + mangledName(fn).substr(4);
    if (helpers_.count(name)) return name;
    const FunctionInfo& f = a_.functions[static_cast<std::size_t>(fn)];
    const Scope& scope = a_.scopes[static_cast<std::size_t>(f.scope)];
    std::vector<Kind> params;
    for (int sym : scope.symbols) params.push_back(a_.symbols[static_cast<std::size_t>(sym)].kind);
    std::string n = std::to_string(params.size());
    std::string d = std::to_string(f.depth);
    std::string text = "OLY_INLINE " + ctype(returnKind(fn)) + " " + name + "(Env env";
    for (std::size_t i = 0; i < params.size(); ++i) text += ", " + ctype(params[i]) + " a" + std::to_string(i);
    text += ") {\n  OLY_STATIC_FRAME(" + n + ") f;\n  void *disp[" + std::to_string(f.depth + 1) + "];\n";
    text += "  OLY_STATIC_SETUP(f, disp, env, " + d + ");\n";
    for (std::size_t i = 0; i < params.size(); ++i)
      text += "  ((" + ctype(params[i]) + " *)f.s)[" + std::to_string(i) + "] = a" + std::to_string(i) + ";\n";
    text += "  return " + mangledName(fn) + "((Env)disp, 0);\n}\n";
    helpers_[name] = text;
    return name;
  }

  // ---- statements ----------------------------------------------------

  void statements(const std::vector<Node>& body) {
    for (const auto& st : body) statement(st);
  }

  void block(const Node& b) {
    ++indent_;
    statements(b.children);
    --indent_;
  }

  std::string store(const ResolvedRef& r, const std::string& value) const {
    if (r.kind == Kind::Proc) {
      if (r.relLevel == 0) return "update_proc(env," + std::to_string(r.offset) + "," + value + ");";
      return "update_proc(env," + std::to_string(r.relLevel) + "," + std::to_string(r.offset) + "," + value + ");";
    }
    return "update_" + suffix(r.kind) + access(r) + "," + value + ");";
  }

  void assignTo(const Node& target, Piece value) {
    switch (target.kind) {
      case NodeKind::Name: {
        const ResolvedRef& r = a_.ref(target);
        if (r.kind == Kind::Object) return;
        line(store(r, value.text));
        return;
      }
      case NodeKind::Index: {
        std::vector<Piece> ops{value, expr(target.children[0]), expr(target.children[1])};
        emitAssigns(sequence(ops));
        Kind elem = a_.expr(target.children[0]).elemKind;
        line("vector_update_" + suffix(elem) + "(" + ops[1].text + "," + ops[2].text + "," + ops[0].text + ");");
        return;
      }
      case NodeKind::Attribute: {
        std::vector<Piece> ops{value, expr(target.children[0])};
        emitAssigns(sequence(ops));
        line("update_complex_" + target.text + "(" + ops[1].text + "," + ops[0].text + ");");
        return;
      }
      default:
        throw std::logic_error("invalid assignment target");
    }
  }

  void augAssign(const Node& st) {
    const Node& target = st.children[0];
    Kind result = a_.expr(target).kind;
    switch (target.kind) {
      case NodeKind::Name: {
        const ResolvedRef& r = a_.ref(target);
        Piece cur = expr(target);
        Piece v = binary(st.text, cur, expr(st.children[1]), result);
        line(store(r, v.text));
        return;
      }
      case NodeKind::Index: {
        Piece base = expr(target.children[0]);
        Piece idx = expr(target.children[1]);
        std::vector<Piece> ops{base, idx};
        auto assigns = sequence(ops);
        emitAssigns(assigns);
        base = ops[0];
        idx = ops[1];
        Piece value = expr(st.children[1]);
        if (value.effectful || base.effectful || idx.effectful) {
          if (!base.literal) {
            std::string t = temp(Kind::Vector);
            line(t + " = " + base.text + ";");
            base.text = t;
          }
          if (!idx.literal) {
            std::string t = temp(Kind::Int);
            line(t + " = " + idx.text + ";");
            idx.text = t;
          }
        }
        Kind elem = a_.expr(target.children[0]).elemKind;
        Piece cur;
        cur.kind = elem;
        cur.text = "vector_lookup_" + suffix(elem) + "(" + base.text + "," + idx.text + ")";
        Piece v = binary(st.text, cur, value, elem);
        line("vector_update_" + suffix(elem) + "(" + base.text + "," + idx.text + "," + v.text + ");");
        return;
      }
      case NodeKind::Attribute: {
        Piece base = expr(target.children[0]);
        Piece value = expr(st.children[1]);
        if (value.effectful || base.effectful) {
          std::string t = temp(Kind::Complex);
          line(t + " = " + base.text + ";");
          base.text = t;
        }
        Piece cur;
        cur.kind = Kind::Real;
        cur.text = "complex_" + target.text + "(" + base.text + ")";
        Piece v = binary(st.text, cur, value, Kind::Real);
        line("update_complex_" + target.text + "(" + base.text + "," + v.text + ");");
        return;
      }
      default:
        throw std::logic_error("invalid augmented target");
    }
  }

  void printCall(const Node& call) {
    std::vector<Piece> ops;
    for (std::size_t i = 1; i < call.children.size(); ++i) ops.push_back(expr(call.children[i]));
    bool anyEffect = false;
    for (const auto& o : ops) anyEffect = anyEffect || o.effectful;
    if (anyEffect) {
      for (auto& o : ops) {
        if (o.literal) continue;
        std::string t = temp(o.kind);
        line(t + " = " + o.text + ";");
        o.text = t;
      }
    }
    for (std::size_t i = 0; i < ops.size(); ++i) {
      if (i) line("oly_print_sep(env);");
      line("oly_print_" + suffix(ops[i].kind) + "(env," + ops[i].text + ");");
    }
    line("oly_print_end(env);");
  }

  void forRange(const Node& st) {
    const Node& call = st.children[1];
    std::vector<const Node*> args;
    for (std::size_t i = 1; i < call.children.size(); ++i) args.push_back(&call.children[i]);
    std::optional<std::int64_t> literalStep = 1;
    const Node* startNode = args.size() >= 2 ? args[0] : nullptr;
    const Node* stopNode = args.size() >= 2 ? args[1] : args[0];
    const Node* stepNode = args.size() == 3 ? args[2] : nullptr;
    if (stepNode) {
      literalStep.reset();
      if (stepNode->kind == NodeKind::IntLit) literalStep = stepNode->intValue;
      if (stepNode->kind == NodeKind::UnaryOp && stepNode->text == "-" &&
          stepNode->children[0].kind == NodeKind::IntLit)
        literalStep = wrapNeg(stepNode->children[0].intValue);
    }
    std::string i = temp(Kind::Int), stop = temp(Kind::Int);
    line(i + " = " + (startNode ? expr(*startNode).text : std::string("0")) + ";");
    line(stop + " = " + expr(*stopNode).text + ";");
    std::string cond, incr;
    if (literalStep) {
      if (*literalStep == 0) {
        line("oly_range_check(env,0);");
        cond = "0";
      } else {
        cond = i + (*literalStep > 0 ? " < " : " > ") + stop;
      }
      incr = i + " += " + std::to_string(*literalStep);
    } else {
      std::string step = temp(Kind::Int);
      line(step + " = " + expr(*stepNode).text + ";");
      line("oly_range_check(env," + step + ");");
      cond = step + " > 0 ? " + i + " < " + stop + " : " + i + " > " + stop;
      incr = i + " += " + step;
    }
    line("for (; " + cond + "; " + incr + ") {");
    ++indent_;
    line(store(a_.ref(st.children[0]), i));
    statements(st.children[2].children);
    --indent_;
    line("}");
  }

  void declare(int fn) {
    const FunctionInfo& f = a_.functions[static_cast<std::size_t>(fn)];
    std::string argc = std::to_string(a_.frameOf(fn).argCount);
    std::string proc;
    if (f.decoratedDeferred)
      proc = "NULL";
    else if (f.dispatch == DispatchMode::DynamicLoad)
      proc = "load_proc(" + cStringLiteral(f.name) + ",env," + argc + ")";
    else
      proc = "mk_proc(" + mangledName(fn) + ",env," + argc + ")";
    const SymbolEntry& s = a_.symbols[static_cast<std::size_t>(f.symbol)];
    int rel = depth_ - s.defLevel;
    if (rel == 0)
      line("declare_proc(env," + std::to_string(s.offset) + "," + cStringLiteral(f.name) + "," + proc + ");");
    else
      line("update_proc(env," + std::to_string(rel) + "," + std::to_string(s.offset) + "," + proc + ");");
  }

  void statement(const Node& st) {
    switch (st.kind) {
      case NodeKind::Assign:
        assignTo(st.children[0], expr(st.children[1]));
        return;
      case NodeKind::AugAssign:
        augAssign(st);
        return;
      case NodeKind::ExprStmt: {
        const Node& e = st.children[0];
        if (e.kind == NodeKind::Call) {
          auto it = a_.callTargets.find(e.id);
          CallTarget t = it == a_.callTargets.end() ? CallTarget::User : it->second;
          if (t == CallTarget::Print) return printCall(e);
          if (t == CallTarget::Mark) {
            line("oly_mark(env," + strLiteral(e.children[1].text) + ");");
            return;
          }
          line(stripOuterParens(expr(e).text) + ";");
          return;
        }
        line("(void)" + expr(e).text + ";");
        return;
      }
      case NodeKind::Return:
        if (st.children.empty()) {
          line("return 0;");
        } else {
          Piece v = expr(st.children[0]);
          line("return(" + stripOuterParens(v.text) + ");");
        }
        return;
      case NodeKind::If: {
        Piece c = expr(st.children[0]);
        line("if " + std::string(c.kind == Kind::Int ? "(" + stripOuterParens(c.text) + ")" : truth(c.text, c.kind)) +
             " {");
        block(st.children[1]);
        if (st.children.size() > 2) {
          line("} else {");
          block(st.children[2]);
        }
        line("}");
        return;
      }
      case NodeKind::While: {
        Piece c = expr(st.children[0]);
        line("while " +
             std::string(c.kind == Kind::Int ? "(" + stripOuterParens(c.text) + ")" : truth(c.text, c.kind)) + " {");
        block(st.children[1]);
        line("}");
        return;
      }
      case NodeKind::For:
        forRange(st);
        return;
      case NodeKind::Delete: {
        const ResolvedRef& r = a_.ref(st.children[0]);
        line("delete_proc(env," + std::to_string(r.relLevel) + "," + std::to_string(r.offset) + ");");
        return;
      }
      case NodeKind::FunctionDef:
        declare(a_.nodeFunction[static_cast<std::size_t>(st.id)]);
        return;
      case NodeKind::Block:
        statements(st.children);
        return;
      default:
        return;
    }
  }

  const ProgramAnalysis& a_;
  int unitTop_;
  bool dynamic_;
  int fn_ = -1;
  int depth_ = 0;
  int indent_ = 1;
  std::vector<std::string> temps_;
  std::string body_;
  std::map<std::string, std::string> helpers_;
};

std::vector<int> unitFunctions(const ProgramAnalysis& a, int unitTop) {
  std::vector<int> out;
  for (const auto& f : a.functions) {
    const FunctionInfo& top = a.functions[static_cast<std::size_t>(f.topLevel)];
    bool dynamicTop = top.dispatch == DispatchMode::DynamicLoad;
    if (unitTop < 0 ? !dynamicTop : f.topLevel == unitTop) out.push_back(f.index);
  }
  return out;
}

std::string slotEnum(const ProgramAnalysis& a, const std::vector<int>& fns) {
  if (fns.empty()) return "";
  std::string out = "enum {\n";
  for (std::size_t i = 0; i < fns.size(); ++i)
    out += "  " + mangledName(fns[i]) + "_slots = " + std::to_string(a.frameOf(fns[i]).slotCount) +
           (i + 1 < fns.size() ? ",\n" : "\n");
  return out + "};\n";
}

std::string objectFileFor(const std::string& kernel, const FunctionInfo& f) {
  return kernel + "_" + mangledName(f.index) + ".o";
}

}  // namespace

const DynSymbolEntry* DynSymbolTable::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.sourceName == name) return &e;
  return nullptr;
}

std::string DynSymbolTable::serialize() const {
  std::string out;
  for (const auto& e : entries)
    out += e.sourceName + "\t" + e.mangled + "\t" + e.objectFile + "\t" + std::to_string(e.argCount) + "\t" +
           (e.deferred ? "1" : "0") + "\n";
  return out;
}

DynSymbolTable DynSymbolTable::parse(const std::string& text) {
  DynSymbolTable table;
  std::istringstream in(text);
  std::string lineText;
  int lineNo = 0;
  while (std::getline(in, lineText)) {
    ++lineNo;
    if (lineText.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = lineText.find('\t', start);
      fields.push_back(lineText.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    auto bad = [&](const std::string& why) {
      fail(ErrorCode::Io, SourcePos{lineNo, 1}, "symbol table line " + std::to_string(lineNo) + ": " + why);
    };
    if (fields.size() != 5) bad("expected 5 tab-separated fields");
    DynSymbolEntry e;
    e.sourceName = fields[0];
    e.mangled = fields[1];
    e.objectFile = fields[2];
    try {
      std::size_t used = 0;
      e.argCount = std::stoi(fields[3], &used);
      if (used != fields[3].size() || e.argCount < 0) bad("bad argument count");
    } catch (const std::logic_error&) {
      bad("bad argument count");
    }
    if (fields[4] != "0" && fields[4] != "1") bad("defer flag must be 0 or 1");
    e.deferred = fields[4] == "1";
    if (e.sourceName.empty() || table.find(e.sourceName)) bad("duplicate or empty name");
    table.entries.push_back(e);
  }
  return table;
}

std::string emitExpression(const Node& node, const ProgramAnalysis& analysis) {
  int scope = analysis.nodeScope[static_cast<std::size_t>(node.id)];
  const Scope& s = analysis.scopes[static_cast<std::size_t>(scope)];
  Emitter e(analysis, -1);
  return e.expression(node, s.function, s.depth);
}

std::string emitFunction(int function, const ProgramAnalysis& analysis) {
  Emitter probe(analysis, -1);
  Emitter e(analysis, probe.unitOf(function));
  return e.function(function);
}

std::string emitDeclaration(int function, const ProgramAnalysis& analysis) {
  const FunctionInfo& f = analysis.functions.at(static_cast<std::size_t>(function));
  Emitter probe(analysis, -1);
  int unit = f.depth == 1 ? -1 : probe.unitOf(function);
  Emitter e(analysis, unit);
  std::string text = e.declaration(function, f.depth - 1);
  while (!text.empty() && (text.front() == ' ')) text.erase(text.begin());
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

std::string emitDelete(const Node& deleteStatement, const ProgramAnalysis& analysis) {
  Emitter e(analysis, -1);
  std::string text = e.deletion(deleteStatement);
  while (!text.empty() && text.front() == ' ') text.erase(text.begin());
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

EmittedProgram emitProgram(const ProgramAnalysis& a, const CodegenConfig& config) {
  EmittedProgram program;

  // Resident unit.
  {
    Emitter e(a, -1);
    std::vector<int> fns = unitFunctions(a, -1);
    std::string defs;
    for (int fn : fns) defs += "\nstatic " + e.function(fn);
    std::string module = e.module();
    std::string body = "#include \"oly_rt.h\"\n\n";
    std::string slots = slotEnum(a, fns);
    if (!slots.empty()) body += slots + "\n";
    for (int fn : fns) body += "static " + e.signature(fn) + ";\n";
    if (!fns.empty()) body += "\n";
    body += e.helperText();
    body += defs + "\n" + module + "\n";
    std::vector<int> dyn = a.dynamicFunctions;
    if (!dyn.empty()) {
      body += "static const OlyDynInfo oly_dyn_table[] = {\n";
      for (int fn : dyn) {
        const FunctionInfo& f = a.functions[static_cast<std::size_t>(fn)];
        body += "  {" + cStringLiteral(f.name) + ", " + std::to_string(a.frameOf(fn).argCount) + ", " +
                std::to_string(a.frameOf(fn).slotCount) + "},\n";
      }
      body += "};\n\n";
    }
    body += "static const OlyProgram oly_program = {" + std::to_string(a.maxLexLevels) + ", " +
            std::to_string(a.frameOf(-1).slotCount) + ", oly_module, " + (dyn.empty() ? "NULL" : "oly_dyn_table") +
            ", " + std::to_string(dyn.size()) + "};\n\n";
    body += "int main(int argc, char **argv) { return oly_main(argc, argv, &oly_program); }\n";
    program.units.push_back({config.kernelName + ".c", body, UnitKind::Resident, -1});
  }

  // One unit per dynamically loaded top-level function; the entry comes first.
  for (int top : a.dynamicFunctions) {
    Emitter e(a, top);
    std::vector<int> fns = unitFunctions(a, top);
    std::string defs;
    for (int fn : fns) defs += std::string("\n") + (fn == top ? "" : "static ") + e.function(fn);
    std::string body = "#define OLY_DYNAMIC_UNIT 1\n#include \"oly_rt.h\"\n\n";
    body += slotEnum(a, fns) + "\n";
    for (int fn : fns)
      if (fn != top) body += "static " + e.signature(fn) + ";\n";
    body += e.helperText();
    body += defs;
    const FunctionInfo& f = a.functions[static_cast<std::size_t>(top)];
    std::string stem = config.kernelName + "_" + mangledName(top);
    program.units.push_back({stem + ".c", body, UnitKind::DynamicFunction, top});
    program.symbols.entries.push_back(
        {f.name, mangledName(top), objectFileFor(config.kernelName, f), a.frameOf(top).argCount, f.decoratedDeferred});
  }
  return program;
}

void writeProgram(const EmittedProgram& program, const std::filesystem::path& dir, const std::string& kernelName) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto write = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) fail(ErrorCode::Io, {}, "cannot write " + p.string());
  };
  for (const auto& u : program.units) write(dir / u.fileName, u.body);
  write(dir / (kernelName + ".symtab"), program.symbols.serialize());
}

}  // namespace microdyn
