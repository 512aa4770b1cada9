#include "microdyn/semant.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "microdyn/error.hpp"

namespace microdyn {

std::string_view kindName(Kind kind) {
  switch (kind) {
    case Kind::Int: return "Int";
    case Kind::Real: return "Real";
    case Kind::Complex: return "Complex";
    case Kind::Vector: return "Vector";
    case Kind::Proc: return "Proc";
    case Kind::Object: return "Object";
    case Kind::Str: return "Str";
  }
  return "?";
}

std::string_view dispatchName(DispatchMode mode) {
  switch (mode) {
    case DispatchMode::StaticDispatch: return "StaticDispatch";
    case DispatchMode::DynamicDispatch: return "DynamicDispatch";
    case DispatchMode::DynamicLoad: return "DynamicLoad";
  }
  return "?";
}

std::optional<DispatchPolicy> parseDispatchPolicy(std::string_view text) {
  if (text == "auto") return DispatchPolicy::Auto;
  if (text == "static") return DispatchPolicy::Static;
  if (text == "dynamic") return DispatchPolicy::Dynamic;
  if (text == "load") return DispatchPolicy::Load;
  return std::nullopt;
}

const FunctionInfo* ProgramAnalysis::functionNamed(std::string_view name) const {
  for (const auto& f : functions)
    if (f.qualName == name || (f.depth == 1 && f.name == name)) return &f;
  return nullptr;
}

const ResolvedRef& ProgramAnalysis::ref(const Node& n) const {
  const auto& r = refs.at(static_cast<std::size_t>(n.id));
  if (!r) throw std::logic_error("node " + std::to_string(n.id) + " has no resolved reference");
  return *r;
}

std::map<std::pair<std::string, std::string>, Kind> ProgramAnalysis::kindTable() const {
  std::map<std::pair<std::string, std::string>, Kind> table;
  for (const auto& s : symbols) table[{scopes[static_cast<std::size_t>(s.scope)].qualName, s.name}] = s.kind;
  return table;
}

namespace {

const std::set<std::string>& builtinNames() {
  static const std::set<std::string> names{"print", "len", "load_function", "mark", "range"};
  return names;
}

template <typename T>
T& at(std::vector<T>& v, int i) {
  return v[static_cast<std::size_t>(i)];
}
template <typename T>
const T& at(const std::vector<T>& v, int i) {
  return v[static_cast<std::size_t>(i)];
}

// ---------------------------------------------------------------------------
// Scope construction and name resolution.

class ScopeBuilder {
 public:
  explicit ScopeBuilder(ProgramAnalysis& a) : a_(a) {}

  void run() {
    std::size_t count = static_cast<std::size_t>(numberNodes(a_.ast));
    a_.refs.assign(count, std::nullopt);
    a_.nodeScope.assign(count, 0);
    a_.nodeFunction.assign(count, -1);
    a_.exprs.assign(count, ExprInfo{});

    Scope module;
    module.qualName = "<module>";
    a_.scopes.push_back(module);
    prescanDecls(a_.ast.children, 0);
    if (!a_.scopes[0].nonlocals.empty())
      fail(ErrorCode::Syntax, a_.ast.span.begin, "nonlocal declaration at module level");
    bindStatements(a_.ast.children, 0);

    a_.frames.assign(a_.functions.size() + 1, FrameLayout{});
    a_.frames[0] = {static_cast<int>(a_.scopes[0].symbols.size()), 0, "<module>"};
    for (const auto& f : a_.functions) {
      const Scope& s = at(a_.scopes, f.scope);
      int args = 0;
      for (int sym : s.symbols) args += at(a_.symbols, sym).isArgument;
      at(a_.frames, f.index + 1) = {static_cast<int>(s.symbols.size()), args, f.name};
    }

    resolveStatements(a_.ast.children, 0);
    for (std::size_t i = 0; i < a_.scopes.size(); ++i) {
      for (const auto& name : a_.scopes[i].nonlocals)
        if (findNonlocal(static_cast<int>(i), name) < 0)
          fail(ErrorCode::NonlocalWithoutBinding, declPos_[{static_cast<int>(i), name}],
               "no binding for nonlocal '" + name + "' in an enclosing function");
    }
  }

 private:
  int addSymbol(int scope, const std::string& name, bool isArgument) {
    Scope& s = at(a_.scopes, scope);
    auto it = s.byName.find(name);
    if (it != s.byName.end()) return it->second;
    SymbolEntry e;
    e.name = name;
    e.defLevel = s.depth;
    e.offset = static_cast<int>(s.symbols.size());
    e.isArgument = isArgument;
    e.scope = scope;
    int id = static_cast<int>(a_.symbols.size());
    a_.symbols.push_back(e);
    s.symbols.push_back(id);
    s.byName[name] = id;
    return id;
  }

  // Scope that a binding of `name` in `scope` writes to, or -1 for nonlocal.
  int bindingScope(int scope, const std::string& name) const {
    const Scope& s = at(a_.scopes, scope);
    if (s.globals.count(name)) return 0;
    if (s.nonlocals.count(name)) return -1;
    return scope;
  }

  int bind(int scope, const std::string& name) {
    int target = bindingScope(scope, name);
    if (target < 0) return -1;
    return addSymbol(target, name, false);
  }

  void prescanDecls(const std::vector<Node>& body, int scope) {
    for (const auto& st : body) {
      if (st.kind == NodeKind::GlobalDecl || st.kind == NodeKind::NonlocalDecl) {
        for (const auto& name : st.names) {
          Scope& s = at(a_.scopes, scope);
          bool global = st.kind == NodeKind::GlobalDecl;
          if ((global && s.nonlocals.count(name)) || (!global && s.globals.count(name)))
            fail(ErrorCode::Syntax, st.span.begin, "name '" + name + "' is both nonlocal and global");
          if (s.byName.count(name) && at(a_.symbols, s.byName.at(name)).isArgument)
            fail(ErrorCode::Syntax, st.span.begin, "parameter '" + name + "' declared " +
                                                         (global ? "global" : "nonlocal"));
          (global ? s.globals : s.nonlocals).insert(name);
          declPos_.emplace(std::make_pair(scope, name), st.span.begin);
        }
      } else if (st.kind == NodeKind::FunctionDef) {
        continue;
      } else {
        for (const auto& c : st.children)
          if (c.kind == NodeKind::Block) prescanDecls(c.children, scope);
      }
    }
  }

  void bindStatements(std::vector<Node>& body, int scope) {
    for (auto& st : body) bindStatement(st, scope);
  }

  void bindStatement(Node& st, int scope) {
    at(a_.nodeScope, st.id) = scope;
    switch (st.kind) {
      case NodeKind::Assign:
      case NodeKind::AugAssign:
        if (st.children[0].kind == NodeKind::Name) noteBinding(bind(scope, st.children[0].text));
        break;
      case NodeKind::For:
        noteBinding(bind(scope, st.children[0].text));
        bindStatements(st.children[2].children, scope);
        break;
      case NodeKind::If:
        bindStatements(st.children[1].children, scope);
        if (st.children.size() > 2) bindStatements(st.children[2].children, scope);
        break;
      case NodeKind::While:
        bindStatements(st.children[1].children, scope);
        break;
      case NodeKind::Delete: {
        int sym = bind(scope, st.children[0].text);
        if (sym >= 0) at(a_.symbols, sym).deleted = true;
        break;
      }
      case NodeKind::ImportFrom:
        if (scope != 0) fail(ErrorCode::UnsupportedFeature, st.span.begin, "import inside a function");
        for (const auto& name : st.names) noteBinding(bind(scope, name));
        break;
      case NodeKind::Return:
        if (scope == 0) fail(ErrorCode::Syntax, st.span.begin, "'return' outside function");
        break;
      case NodeKind::FunctionDef:
        bindFunction(st, scope);
        break;
      default:
        break;
    }
  }

  void noteBinding(int sym) {
    if (sym >= 0) at(a_.symbols, sym).otherBindings++;
  }

  void bindFunction(Node& def, int scope) {
    int sym = bind(scope, def.text);
    FunctionInfo f;
    f.name = def.text;
    f.node = def.id;
    f.parentScope = scope;
    f.depth = at(a_.scopes, scope).depth + 1;
    f.index = static_cast<int>(a_.functions.size());
    f.decoratedDynamic = def.isDynamic();
    f.decoratedDeferred = def.isDeferred();
    f.symbol = sym;
    const Scope& parent = at(a_.scopes, scope);
    f.qualName = parent.function < 0 ? def.text : parent.qualName + "." + def.text;
    f.topLevel = parent.function < 0 ? f.index : at(a_.functions, parent.function).topLevel;
    if (sym >= 0) {
      SymbolEntry& e = at(a_.symbols, sym);
      if (e.defFunction >= 0)
        e.otherBindings++;
      else
        e.defFunction = f.index;
    }
    Scope s;
    s.parent = scope;
    s.depth = f.depth;
    s.function = f.index;
    s.qualName = f.qualName;
    f.scope = static_cast<int>(a_.scopes.size());
    a_.scopes.push_back(s);
    a_.functions.push_back(f);
    at(a_.nodeFunction, def.id) = f.index;
    at(a_.nodeScope, def.id) = scope;

    int self = f.scope;
    std::set<std::string> seen;
    for (const auto& p : def.names) {
      if (!seen.insert(p).second)
        fail(ErrorCode::Syntax, def.span.begin, "duplicate parameter '" + p + "'");
      addSymbol(self, p, true);
    }
    prescanDecls(def.children, self);
    bindStatements(def.children, self);
  }

  // Symbol a nonlocal declaration in `scope` refers to.
  int findNonlocal(int scope, const std::string& name) const {
    for (int t = at(a_.scopes, scope).parent; t > 0; t = at(a_.scopes, t).parent) {
      const Scope& s = at(a_.scopes, t);
      if (s.globals.count(name)) return -1;
      if (s.nonlocals.count(name)) continue;
      auto it = s.byName.find(name);
      if (it != s.byName.end()) return it->second;
    }
    return -1;
  }

  // -1 when unbound (possibly a builtin).
  int lookup(int scope, const std::string& name) const {
    const Scope& s = at(a_.scopes, scope);
    auto moduleSym = [&]() -> int {
      auto it = a_.scopes[0].byName.find(name);
      return it == a_.scopes[0].byName.end() ? -1 : it->second;
    };
    if (s.globals.count(name)) return moduleSym();
    if (s.nonlocals.count(name)) return findNonlocal(scope, name);
    auto it = s.byName.find(name);
    if (it != s.byName.end()) return it->second;
    for (int t = s.parent; t >= 0; t = at(a_.scopes, t).parent) {
      const Scope& o = at(a_.scopes, t);
      if (t == 0) return moduleSym();
      if (o.globals.count(name)) return moduleSym();
      if (o.nonlocals.count(name)) continue;
      auto found = o.byName.find(name);
      if (found != o.byName.end()) return found->second;
    }
    return -1;
  }

  void resolveName(Node& n, int scope, bool allowBuiltin) {
    at(a_.nodeScope, n.id) = scope;
    int sym = lookup(scope, n.text);
    if (sym < 0) {
      if (allowBuiltin && builtinNames().count(n.text)) return;
      if (at(a_.scopes, scope).nonlocals.count(n.text))
        fail(ErrorCode::NonlocalWithoutBinding, n.span.begin,
             "no binding for nonlocal '" + n.text + "' in an enclosing function");
      fail(ErrorCode::UnboundName, n.span.begin, "name '" + n.text + "' is not defined");
    }
    const SymbolEntry& e = at(a_.symbols, sym);
    ResolvedRef r;
    r.relLevel = at(a_.scopes, scope).depth - e.defLevel;
    r.offset = e.offset;
    r.symbol = sym;
    at(a_.refs, n.id) = r;
  }

  void resolveStatements(std::vector<Node>& body, int scope) {
    for (auto& st : body) resolveStatement(st, scope);
  }

  void resolveStatement(Node& st, int scope) {
    at(a_.nodeScope, st.id) = scope;
    switch (st.kind) {
      case NodeKind::FunctionDef: {
        int f = at(a_.nodeFunction, st.id);
        int self = at(a_.functions, f).scope;
        resolveStatements(st.children, self);
        return;
      }
      case NodeKind::Block:
        resolveStatements(st.children, scope);
        return;
      case NodeKind::Assign:
      case NodeKind::AugAssign:
        resolveExpr(st.children[1], scope);
        resolveExpr(st.children[0], scope);
        return;
      case NodeKind::For:
        resolveExpr(st.children[1], scope);
        resolveName(st.children[0], scope, false);
        resolveStatement(st.children[2], scope);
        return;
      case NodeKind::If:
      case NodeKind::While:
        resolveExpr(st.children[0], scope);
        for (std::size_t i = 1; i < st.children.size(); ++i) resolveStatement(st.children[i], scope);
        return;
      case NodeKind::Delete:
        resolveName(st.children[0], scope, false);
        return;
      case NodeKind::Return:
      case NodeKind::ExprStmt:
        for (auto& c : st.children) resolveExpr(c, scope);
        return;
      default:
        return;
    }
  }

  void resolveExpr(Node& e, int scope) {
    at(a_.nodeScope, e.id) = scope;
    if (e.kind == NodeKind::Name) {
      resolveName(e, scope, false);
      return;
    }
    if (e.kind == NodeKind::Call && e.children[0].kind == NodeKind::Name) {
      at(a_.nodeScope, e.children[0].id) = scope;
      resolveName(e.children[0], scope, true);
      for (std::size_t i = 1; i < e.children.size(); ++i) resolveExpr(e.children[i], scope);
      return;
    }
    for (auto& c : e.children) resolveExpr(c, scope);
  }

  ProgramAnalysis& a_;
  std::map<std::pair<int, std::string>, SourcePos> declPos_;
};

// ---------------------------------------------------------------------------
// Kind inference.

enum class Base { Unknown, Int, Real, Complex, Str, Vector, Proc, Object, None };

Kind toKind(Base b) {
  switch (b) {
    case Base::Real: return Kind::Real;
    case Base::Complex: return Kind::Complex;
    case Base::Str: return Kind::Str;
    case Base::Vector: return Kind::Vector;
    case Base::Proc: return Kind::Proc;
    case Base::Object: return Kind::Object;
    default: return Kind::Int;
  }
}

Base fromKind(Kind k) {
  switch (k) {
    case Kind::Int: return Base::Int;
    case Kind::Real: return Base::Real;
    case Kind::Complex: return Base::Complex;
    case Kind::Vector: return Base::Vector;
    case Kind::Proc: return Base::Proc;
    case Kind::Object: return Base::Object;
    case Kind::Str: return Base::Str;
  }
  return Base::Unknown;
}

std::string baseName(Base b) {
  if (b == Base::Unknown) return "unknown";
  if (b == Base::None) return "None";
  return std::string(kindName(toKind(b)));
}

struct Ty {
  Base base = Base::Unknown;
  int elem = -1;  // type variable of the elements (vectors)
  int cls = -1;   // proc class
};

bool numeric(Base b) { return b == Base::Int || b == Base::Real; }

class Inference {
 public:
  Inference(ProgramAnalysis& a, const std::map<std::string, Kind>& hints) : a_(a), hints_(hints) {}

  void run() {
    for (std::size_t i = 0; i < a_.symbols.size(); ++i) newVar(static_cast<int>(i));
    for (auto& f : a_.functions) {
      int ret = newVar(-1);
      retVar_.push_back(ret);
      Class c;
      c.parent = f.index;
      c.ret = ret;
      for (int sym : at(a_.scopes, f.scope).symbols)
        if (at(a_.symbols, sym).isArgument) c.params.push_back(sym);
      c.functions.push_back(f.index);
      classes_.push_back(c);
    }
    applyHints();
    fixpoint();
    // Parameters of functions nothing calls default to Int.
    for (const auto& f : a_.functions)
      for (int p : at(classes_, f.index).params)
        if (var(p).base == Base::Unknown) set(p, Ty{Base::Int, -1, -1});
    fixpoint();
    finish();
  }

 private:
  struct Var {
    int parent;
    Base base = Base::Unknown;
    int elem = -1;
    int cls = -1;
    int symbol = -1;
    bool isElem = false;
  };
  struct Class {
    int parent;
    std::vector<int> params;
    int ret = -1;
    bool returnsValue = false;
    std::vector<int> functions;
  };

  int newVar(int symbol, bool isElem = false) {
    Var v;
    v.parent = static_cast<int>(vars_.size());
    v.symbol = symbol;
    v.isElem = isElem;
    vars_.push_back(v);
    return v.parent;
  }

  int find(int v) {
    while (at(vars_, v).parent != v) {
      at(vars_, v).parent = at(vars_, at(vars_, v).parent).parent;
      v = at(vars_, v).parent;
    }
    return v;
  }
  Var& var(int v) { return at(vars_, find(v)); }

  int findClass(int c) {
    while (at(classes_, c).parent != c) {
      at(classes_, c).parent = at(classes_, at(classes_, c).parent).parent;
      c = at(classes_, c).parent;
    }
    return c;
  }

  Ty tyOf(int v) {
    Var& r = var(v);
    return {r.base, r.elem, r.cls};
  }

  void set(int v, Ty t) {
    Var& r = var(v);
    r.base = t.base;
    r.elem = t.elem;
    r.cls = t.cls;
    changed_ = true;
  }

  [[noreturn]] void conflict(int v, Base had, Base got, SourcePos pos) {
    int root = find(v);
    int sym = -1;
    for (std::size_t i = 0; i < vars_.size() && sym < 0; ++i)
      if (vars_[i].symbol >= 0 && find(static_cast<int>(i)) == root) sym = vars_[i].symbol;
    std::string what = sym >= 0 ? "'" + at(a_.symbols, sym).name + "'" : "value";
    if (at(vars_, v).isElem || var(v).isElem) what = "vector element";
    if (sym >= 0 && at(a_.symbols, sym).defFunction >= 0)
      fail(ErrorCode::RedeclarationKind, pos,
           what + " is declared as a function and also bound to " + baseName(got));
    fail(ErrorCode::KindConflict, pos, what + " has kind " + baseName(had) + " but is assigned " + baseName(got));
  }

  void join(int v, Ty t, SourcePos pos) {
    if (t.base == Base::Unknown) return;
    if (t.base == Base::None) fail(ErrorCode::KindConflict, pos, "expression has no value");
    Var& r = var(v);
    if (r.isElem && !numeric(t.base))
      fail(ErrorCode::KindConflict, pos, "vector elements must be Int or Real, not " + baseName(t.base));
    if (r.base == Base::Unknown) {
      set(v, t);
      return;
    }
    if (r.base == t.base) {
      if (t.base == Base::Vector) unifyVars(r.elem, t.elem, pos);
      if (t.base == Base::Proc) unifyClasses(r.cls, t.cls, pos);
      return;
    }
    if (r.base == Base::Int && t.base == Base::Real) {
      r.base = Base::Real;
      changed_ = true;
      return;
    }
    if (r.base == Base::Real && t.base == Base::Int) return;
    conflict(v, r.base, t.base, pos);
  }

  void unifyVars(int a, int b, SourcePos pos) {
    int ra = find(a), rb = find(b);
    if (ra == rb) return;
    Ty tb = tyOf(rb);
    bool elem = at(vars_, ra).isElem || at(vars_, rb).isElem;
    at(vars_, rb).parent = ra;
    at(vars_, ra).isElem = elem;
    changed_ = true;
    join(ra, tb, pos);
  }

  void unifyClasses(int a, int b, SourcePos pos) {
    int ra = findClass(a), rb = findClass(b);
    if (ra == rb) return;
    Class& ca = at(classes_, ra);
    Class& cb = at(classes_, rb);
    if (ca.params.size() != cb.params.size())
      fail(ErrorCode::ArityMismatch, pos,
           "functions taking " + std::to_string(ca.params.size()) + " and " +
               std::to_string(cb.params.size()) + " arguments used interchangeably");
    cb.parent = ra;
    changed_ = true;
    std::vector<int> params = cb.params;
    int ret = cb.ret;
    bool rv = cb.returnsValue;
    std::vector<int> fns = cb.functions;
    Class& merged = at(classes_, ra);
    merged.returnsValue = merged.returnsValue || rv;
    merged.functions.insert(merged.functions.end(), fns.begin(), fns.end());
    std::vector<int> mine = merged.params;
    int myRet = merged.ret;
    for (std::size_t i = 0; i < params.size(); ++i) unifyVars(mine[i], params[i], pos);
    unifyVars(myRet, ret, pos);
  }

  void applyHints() {
    for (const auto& [key, kind] : hints_) {
      auto dot = key.rfind('.');
      if (dot == std::string::npos) continue;
      std::string scopeName = key.substr(0, dot), name = key.substr(dot + 1);
      for (const auto& s : a_.scopes) {
        if (s.qualName != scopeName) continue;
        auto it = s.byName.find(name);
        if (it == s.byName.end()) continue;
        Ty t{fromKind(kind), -1, -1};
        if (t.base == Base::Vector) t.elem = newVar(-1, true);
        set(it->second, t);
      }
    }
  }

  void fixpoint() {
    do {
      changed_ = false;
      validate_ = false;
      walkStatements(a_.ast.children, -1);
    } while (changed_);
  }

  int elemVarFor(const Node& n) {
    auto it = nodeElem_.find(n.id);
    if (it != nodeElem_.end()) return it->second;
    int v = newVar(-1, true);
    nodeElem_[n.id] = v;
    return v;
  }

  int symbolOf(const Node& name) const {
    const auto& r = at(a_.refs, name.id);
    return r ? r->symbol : -1;
  }

  // Statement walk; `fn` is the enclosing function index (-1 for module).
  void walkStatements(const std::vector<Node>& body, int fn) {
    for (const auto& st : body) walkStatement(st, fn);
  }

  void storeTo(const Node& target, Ty value, SourcePos pos, int fn) {
    switch (target.kind) {
      case NodeKind::Name: {
        int sym = symbolOf(target);
        if (validate_ && value.base == Base::Proc) checkProcStore(target, value, pos, fn);
        join(sym, value, pos);
        record(target, tyOf(sym));
        break;
      }
      case NodeKind::Index: {
        Ty base = typeOf(target.children[0], fn);
        Ty idx = typeOf(target.children[1], fn);
        requireIndex(idx, target.children[1]);
        if (base.base == Base::Vector) {
          join(base.elem, value, pos);
          record(target, tyOf(base.elem));
        } else if (base.base != Base::Unknown) {
          fail(ErrorCode::KindConflict, target.span.begin, "cannot index a value of kind " + baseName(base.base));
        }
        break;
      }
      case NodeKind::Attribute: {
        Ty base = typeOf(target.children[0], fn);
        if (base.base != Base::Unknown) requireComplexField(target, base);
        if (value.base != Base::Unknown && !numeric(value.base))
          fail(ErrorCode::KindConflict, pos, "complex parts are Real");
        record(target, Ty{Base::Real, -1, -1});
        break;
      }
      default:
        fail(ErrorCode::Syntax, target.span.begin, "invalid assignment target");
    }
  }

  void requireComplexField(const Node& attr, Ty base) {
    if (base.base != Base::Complex || (attr.text != "real" && attr.text != "imag"))
      fail(ErrorCode::UnsupportedFeature, attr.span.begin,
           "attribute '" + attr.text + "' on " + baseName(base.base));
  }

  void requireIndex(Ty idx, const Node& n) {
    if (idx.base != Base::Unknown && idx.base != Base::Int)
      fail(ErrorCode::KindConflict, n.span.begin, "vector index must be Int, not " + baseName(idx.base));
  }

  void walkStatement(const Node& st, int fn) {
    switch (st.kind) {
      case NodeKind::FunctionDef: {
        int f = at(a_.nodeFunction, st.id);
        const FunctionInfo& info = at(a_.functions, f);
        if (info.symbol >= 0) join(info.symbol, Ty{Base::Proc, -1, f}, st.span.begin);
        walkStatements(st.children, f);
        return;
      }
      case NodeKind::Assign: {
        Ty v = typeOf(st.children[1], fn);
        storeTo(st.children[0], v, st.span.begin, fn);
        return;
      }
      case NodeKind::AugAssign: {
        Ty cur = typeOf(st.children[0], fn);
        Ty v = typeOf(st.children[1], fn);
        Ty r = binaryType(st.text, cur, v, st, fn);
        storeTo(st.children[0], r, st.span.begin, fn);
        return;
      }
      case NodeKind::Return: {
        if (st.children.empty()) return;
        Ty v = typeOf(st.children[0], fn);
        Class& c = at(classes_, findClass(fn));
        if (!at(classes_, fn).returnsValue || !c.returnsValue) {
          at(classes_, fn).returnsValue = true;
          c.returnsValue = true;
          changed_ = true;
        }
        if (validate_ && v.base == Base::Proc) {
          for (int g : at(classes_, findClass(v.cls)).functions)
            if (at(a_.functions, g).depth > 1)
              fail(ErrorCode::UnsupportedFeature, st.span.begin,
                   "returning nested function '" + at(a_.functions, g).name + "' lets it outlive its frame");
        }
        join(at(retVar_, fn), v, st.span.begin);
        return;
      }
      case NodeKind::If:
      case NodeKind::While:
        requireTruthy(typeOf(st.children[0], fn), st.children[0]);
        for (std::size_t i = 1; i < st.children.size(); ++i) walkStatements(st.children[i].children, fn);
        return;
      case NodeKind::For: {
        const Node& call = st.children[1];
        for (std::size_t i = 1; i < call.children.size(); ++i) {
          Ty t = typeOf(call.children[i], fn);
          if (t.base != Base::Unknown && t.base != Base::Int)
            fail(ErrorCode::KindConflict, call.children[i].span.begin, "range arguments must be Int");
        }
        if (validate_) record(call, Ty{Base::None, -1, -1});
        storeTo(st.children[0], Ty{Base::Int, -1, -1}, st.span.begin, fn);
        walkStatements(st.children[2].children, fn);
        return;
      }
      case NodeKind::ExprStmt:
        typeOf(st.children[0], fn, true);
        return;
      case NodeKind::Delete: {
        const Node& n = st.children[0];
        int sym = symbolOf(n);
        Ty t = tyOf(sym);
        if (validate_ && t.base != Base::Proc)
          fail(ErrorCode::DeleteNonProc, st.span.begin,
               "del applies to functions only; '" + n.text + "' is " + baseName(t.base));
        record(n, t);
        return;
      }
      case NodeKind::ImportFrom:
        for (const auto& name : st.names) {
          auto it = a_.scopes[0].byName.find(name);
          if (it != a_.scopes[0].byName.end()) join(it->second, Ty{Base::Object, -1, -1}, st.span.begin);
        }
        return;
      default:
        return;
    }
  }

  void requireTruthy(Ty t, const Node& n) {
    if (t.base == Base::None) fail(ErrorCode::KindConflict, n.span.begin, "expression has no value");
  }

  // A proc stored anywhere but the local frame must not outlive the frame
  // its nested members were created in.
  void checkProcStore(const Node& target, Ty value, SourcePos pos, int fn) {
    const ResolvedRef& r = *at(a_.refs, target.id);
    if (r.relLevel == 0) return;
    int targetScope = at(a_.symbols, r.symbol).scope;
    for (int g : at(classes_, findClass(value.cls)).functions) {
      const FunctionInfo& gi = at(a_.functions, g);
      if (gi.depth <= 1) continue;
      bool inside = false;
      for (int s = targetScope; s >= 0; s = at(a_.scopes, s).parent)
        if (s == gi.parentScope) inside = true;
      if (!inside)
        fail(ErrorCode::UnsupportedFeature, pos,
             "storing nested function '" + gi.name + "' in an outer scope lets it outlive its frame");
    }
    (void)fn;
  }

  void record(const Node& n, Ty t) {
    if (!validate_) return;
    ExprInfo& e = at(a_.exprs, n.id);
    e.none = t.base == Base::None;
    if (t.base == Base::Unknown) {
      fail(ErrorCode::AmbiguousKind, n.span.begin, "kind of this expression cannot be inferred");
    }
    e.kind = toKind(t.base);
    if (t.base == Base::Vector) {
      Base eb = var(t.elem).base;
      e.elemKind = eb == Base::Real ? Kind::Real : Kind::Int;
    }
    if (t.base == Base::Proc) e.procClass = findClass(t.cls);
  }

  Ty binaryType(const std::string& op, Ty l, Ty r, const Node& at_, int fn) {
    (void)fn;
    if (l.base == Base::None || r.base == Base::None)
      fail(ErrorCode::KindConflict, at_.span.begin, "expression has no value");
    if (l.base == Base::Unknown || r.base == Base::Unknown) {
      if (op == "/" && (l.base == Base::Unknown || numeric(l.base)) &&
          (r.base == Base::Unknown || numeric(r.base)))
        return {Base::Real, -1, -1};
      return {};
    }
    auto mismatch = [&]() -> Ty {
      fail(ErrorCode::KindConflict, at_.span.begin,
           "operator '" + op + "' does not apply to " + baseName(l.base) + " and " + baseName(r.base));
    };
    if (!numeric(l.base) || !numeric(r.base)) return mismatch();
    if (op == "/") return {Base::Real, -1, -1};
    if (op == "//" || op == "%") {
      if (l.base != Base::Int || r.base != Base::Int)
        fail(ErrorCode::KindConflict, at_.span.begin, "operator '" + op + "' requires Int operands");
      return {Base::Int, -1, -1};
    }
    if (l.base == Base::Real || r.base == Base::Real) return {Base::Real, -1, -1};
    return {Base::Int, -1, -1};
  }

  static bool isRepeatList(const Node& n) { return n.kind == NodeKind::ListLit && n.children.size() == 1; }

  Ty typeOf(const Node& e, int fn, bool statementLevel = false) {
    Ty t = computeType(e, fn, statementLevel);
    record(e, t);
    return t;
  }

  Ty computeType(const Node& e, int fn, bool statementLevel) {
    switch (e.kind) {
      case NodeKind::IntLit: return {Base::Int, -1, -1};
      case NodeKind::RealLit: return {Base::Real, -1, -1};
      case NodeKind::StringLit: return {Base::Str, -1, -1};
      case NodeKind::Name: {
        int sym = symbolOf(e);
        if (sym < 0)
          fail(ErrorCode::UnsupportedFeature, e.span.begin, "builtin '" + e.text + "' used as a value");
        Ty t = tyOf(sym);
        if (validate_ && t.base == Base::Object)
          fail(ErrorCode::UnsupportedFeature, e.span.begin, "'" + e.text + "' has no value in kernels");
        return t;
      }
      case NodeKind::ListLit: {
        int ev = elemVarFor(e);
        for (const auto& c : e.children) join(ev, typeOf(c, fn), c.span.begin);
        return {Base::Vector, ev, -1};
      }
      case NodeKind::BinOp: {
        if (e.text == "*" && (isRepeatList(e.children[0]) || isRepeatList(e.children[1]))) {
          bool leftList = isRepeatList(e.children[0]);
          const Node& list = leftList ? e.children[0] : e.children[1];
          const Node& count = leftList ? e.children[1] : e.children[0];
          Ty n = typeOf(count, fn);
          if (n.base != Base::Unknown && n.base != Base::Int)
            fail(ErrorCode::KindConflict, count.span.begin, "list repetition count must be Int");
          return typeOf(list, fn);
        }
        Ty l = typeOf(e.children[0], fn);
        Ty r = typeOf(e.children[1], fn);
        if (e.text == "and" || e.text == "or") {
          if (l.base == Base::Unknown || r.base == Base::Unknown) return {};
          if (numeric(l.base) && numeric(r.base))
            return {l.base == Base::Real || r.base == Base::Real ? Base::Real : Base::Int, -1, -1};
          fail(ErrorCode::KindConflict, e.span.begin, "'" + e.text + "' operands must be Int or Real");
        }
        if (l.base == Base::Vector || r.base == Base::Vector)
          fail(ErrorCode::UnsupportedFeature, e.span.begin, "arithmetic on vectors");
        return binaryType(e.text, l, r, e, fn);
      }
      case NodeKind::UnaryOp: {
        Ty v = typeOf(e.children[0], fn);
        if (e.text == "not") {
          requireTruthy(v, e.children[0]);
          return {Base::Int, -1, -1};
        }
        if (v.base == Base::Unknown) return {};
        if (!numeric(v.base))
          fail(ErrorCode::KindConflict, e.span.begin, "unary '" + e.text + "' requires Int or Real");
        return {v.base, -1, -1};
      }
      case NodeKind::Compare: {
        Ty l = typeOf(e.children[0], fn);
        Ty r = typeOf(e.children[1], fn);
        if ((l.base != Base::Unknown && !numeric(l.base)) || (r.base != Base::Unknown && !numeric(r.base)))
          fail(ErrorCode::KindConflict, e.span.begin, "comparison requires Int or Real operands");
        return {Base::Int, -1, -1};
      }
      case NodeKind::Index: {
        Ty b = typeOf(e.children[0], fn);
        requireIndex(typeOf(e.children[1], fn), e.children[1]);
        if (b.base == Base::Unknown) return {};
        if (b.base != Base::Vector)
          fail(ErrorCode::KindConflict, e.span.begin, "cannot index a value of kind " + baseName(b.base));
        return tyOf(b.elem);
      }
      case NodeKind::Attribute: {
        Ty b = typeOf(e.children[0], fn);
        if (b.base == Base::Unknown) return {};
        requireComplexField(e, b);
        return {Base::Real, -1, -1};
      }
      case NodeKind::Call:
        return callType(e, fn, statementLevel);
      default:
        fail(ErrorCode::UnsupportedFeature, e.span.begin, "unexpected expression");
    }
  }

  Ty callType(const Node& call, int fn, bool statementLevel) {
    const Node& callee = call.children[0];
    std::size_t argc = call.children.size() - 1;
    bool builtin = callee.kind == NodeKind::Name && symbolOf(callee) < 0;
    if (builtin) {
      const std::string& name = callee.text;
      auto arity = [&](std::size_t n) {
        if (argc != n)
          fail(ErrorCode::ArityMismatch, call.span.begin,
               name + "() takes " + std::to_string(n) + " argument" + (n == 1 ? "" : "s"));
      };
      if (validate_) at(a_.exprs, callee.id).none = true;
      if (name == "print") {
        if (validate_) a_.callTargets[call.id] = CallTarget::Print;
        for (std::size_t i = 1; i <= argc; ++i) {
          Ty t = typeOf(call.children[i], fn);
          if (t.base == Base::None)
            fail(ErrorCode::KindConflict, call.children[i].span.begin, "expression has no value");
        }
        if (!statementLevel) fail(ErrorCode::KindConflict, call.span.begin, "print() has no value");
        return {Base::None, -1, -1};
      }
      if (name == "len") {
        arity(1);
        if (validate_) a_.callTargets[call.id] = CallTarget::Len;
        Ty t = typeOf(call.children[1], fn);
        if (t.base != Base::Unknown && t.base != Base::Vector)
          fail(ErrorCode::KindConflict, call.span.begin, "len() requires a vector");
        return {Base::Int, -1, -1};
      }
      if (name == "mark") {
        arity(1);
        if (validate_) a_.callTargets[call.id] = CallTarget::Mark;
        if (call.children[1].kind != NodeKind::StringLit)
          fail(ErrorCode::KindConflict, call.span.begin, "mark() takes a string literal");
        typeOf(call.children[1], fn);
        if (!statementLevel) fail(ErrorCode::KindConflict, call.span.begin, "mark() has no value");
        return {Base::None, -1, -1};
      }
      if (name == "load_function") {
        arity(1);
        const Node& arg = call.children[1];
        if (arg.kind != NodeKind::StringLit)
          fail(ErrorCode::KindConflict, call.span.begin, "load_function() takes a string literal");
        typeOf(arg, fn);
        int target = -1;
        for (const auto& f : a_.functions)
          if (f.depth == 1 && f.name == arg.text && f.decoratedDynamic) target = f.index;
        if (target < 0)
          fail(ErrorCode::UnboundName, arg.span.begin,
               "no top-level @dynamic function named '" + arg.text + "'");
        if (validate_) {
          a_.callTargets[call.id] = CallTarget::LoadFunction;
          a_.loadTargets[call.id] = target;
        }
        return {Base::Proc, -1, target};
      }
      fail(ErrorCode::UnsupportedFeature, call.span.begin, "builtin '" + name + "' is not callable here");
    }
    if (validate_) a_.callTargets[call.id] = CallTarget::User;
    Ty f = typeOf(callee, fn);
    std::vector<Ty> args;
    for (std::size_t i = 1; i <= argc; ++i) args.push_back(typeOf(call.children[i], fn));
    if (f.base == Base::Unknown) return {};
    if (f.base != Base::Proc)
      fail(ErrorCode::KindConflict, call.span.begin, "value of kind " + baseName(f.base) + " is not callable");
    int c = findClass(f.cls);
    Class cls = at(classes_, c);
    if (cls.params.size() != argc)
      fail(ErrorCode::ArityMismatch, call.span.begin,
           "call passes " + std::to_string(argc) + " arguments, function takes " +
               std::to_string(cls.params.size()));
    for (std::size_t i = 0; i < argc; ++i) {
      if (validate_ && args[i].base == Base::Proc) checkProcArg(args[i]);
      join(cls.params[i], args[i], call.children[i + 1].span.begin);
    }
    c = findClass(c);
    Ty r = tyOf(at(classes_, c).ret);
    if (r.base == Base::Unknown && validate_ && !at(classes_, c).returnsValue) return {Base::None, -1, -1};
    if (r.base == Base::Unknown && statementLevel && !at(classes_, c).returnsValue && validate_)
      return {Base::None, -1, -1};
    return r;
  }

  void checkProcArg(Ty) {}

  void finish() {
    // Unused values without any evidence default to Int.
    for (std::size_t i = 0; i < a_.symbols.size(); ++i) {
      bool read = false;
      for (const auto& r : a_.refs)
        if (r && r->symbol == static_cast<int>(i)) read = true;
      if (var(static_cast<int>(i)).base == Base::Unknown && !read) set(static_cast<int>(i), Ty{Base::Int, -1, -1});
    }
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i].isElem && var(static_cast<int>(i)).base == Base::Unknown)
        set(static_cast<int>(i), Ty{Base::Int, -1, -1});
    fixpoint();
    validate_ = true;
    walkStatements(a_.ast.children, -1);

    for (std::size_t i = 0; i < a_.symbols.size(); ++i) {
      SymbolEntry& s = a_.symbols[i];
      Ty t = tyOf(static_cast<int>(i));
      if (t.base == Base::Unknown) {
        SourcePos pos{};
        for (std::size_t n = 0; n < a_.refs.size(); ++n)
          if (a_.refs[n] && a_.refs[n]->symbol == static_cast<int>(i)) {
            pos = nodePos(static_cast<int>(n));
            break;
          }
        fail(ErrorCode::AmbiguousKind, pos, "kind of '" + s.name + "' cannot be inferred");
      }
      s.kind = toKind(t.base);
      if (t.base == Base::Vector) s.elemKind = var(t.elem).base == Base::Real ? Kind::Real : Kind::Int;
      if (t.base == Base::Proc) s.procClass = findClass(t.cls);
    }
    for (auto& r : a_.refs)
      if (r) r->kind = a_.symbols[static_cast<std::size_t>(r->symbol)].kind;

    for (auto& f : a_.functions) {
      int c = findClass(f.index);
      Ty r = tyOf(at(retVar_, f.index));
      f.returnsValue = at(classes_, c).returnsValue;
      f.returnKind = r.base == Base::Unknown ? Kind::Int : toKind(r.base);
      if (r.base == Base::Vector) f.returnElem = var(r.elem).base == Base::Real ? Kind::Real : Kind::Int;
    }
    for (std::size_t c = 0; c < classes_.size(); ++c) {
      if (findClass(static_cast<int>(c)) != static_cast<int>(c)) continue;
      const Class& cl = classes_[c];
      ProcSignature sig;
      for (int p : cl.params) {
        Ty t = tyOf(p);
        sig.params.push_back(toKind(t.base));
        sig.paramElems.push_back(t.base == Base::Vector && var(t.elem).base == Base::Real ? Kind::Real
                                                                                         : Kind::Int);
      }
      Ty r = tyOf(cl.ret);
      sig.ret = r.base == Base::Unknown ? Kind::Int : toKind(r.base);
      sig.retElem = r.base == Base::Vector && var(r.elem).base == Base::Real ? Kind::Real : Kind::Int;
      sig.returnsValue = cl.returnsValue;
      sig.functions = cl.functions;
      std::sort(sig.functions.begin(), sig.functions.end());
      a_.procClasses[static_cast<int>(c)] = sig;
    }
  }

  SourcePos nodePos(int id) const {
    SourcePos pos{};
    std::function<bool(const Node&)> walk = [&](const Node& n) {
      if (n.id == id) {
        pos = n.span.begin;
        return true;
      }
      for (const auto& c : n.children)
        if (walk(c)) return true;
      return false;
    };
    walk(a_.ast);
    return pos;
  }

  ProgramAnalysis& a_;
  const std::map<std::string, Kind>& hints_;
  std::vector<Var> vars_;
  std::vector<Class> classes_;
  std::vector<int> retVar_;
  std::map<int, int> nodeElem_;
  bool changed_ = false;
  bool validate_ = false;
};

// ---------------------------------------------------------------------------
// Call graph and classification.

void collectCalls(const Node& n, const ProgramAnalysis& a, std::vector<int>& out) {
  if (n.kind == NodeKind::FunctionDef) return;
  if (n.kind == NodeKind::Call && n.children[0].kind == NodeKind::Name) {
    const auto& r = a.refs[static_cast<std::size_t>(n.children[0].id)];
    if (r) {
      const SymbolEntry& s = a.symbols[static_cast<std::size_t>(r->symbol)];
      if (s.defFunction >= 0 && s.otherBindings == 0 && !s.deleted) {
        out.push_back(s.defFunction);
      } else if (s.procClass >= 0) {
        for (int f : a.procClasses.at(s.procClass).functions) out.push_back(f);
      }
    }
  } else if (n.kind == NodeKind::Call) {
    const ExprInfo& e = a.exprs[static_cast<std::size_t>(n.children[0].id)];
    if (e.kind == Kind::Proc && e.procClass >= 0)
      for (int f : a.procClasses.at(e.procClass).functions) out.push_back(f);
  }
  for (const auto& c : n.children) collectCalls(c, a, out);
}

bool refsEnclosingScope(const Node& n, const ProgramAnalysis& a, int selfScope) {
  if (n.kind == NodeKind::FunctionDef) return false;
  const auto& r = a.refs[static_cast<std::size_t>(n.id)];
  if (r) {
    int s = a.symbols[static_cast<std::size_t>(r->symbol)].scope;
    if (s != selfScope && s != 0) return true;
  }
  for (const auto& c : n.children)
    if (refsEnclosingScope(c, a, selfScope)) return true;
  return false;
}

const Node* findNode(const Node& n, int id) {
  if (n.id == id) return &n;
  for (const auto& c : n.children)
    if (const Node* f = findNode(c, id)) return f;
  return nullptr;
}

void buildCallGraph(ProgramAnalysis& a) {
  for (auto& f : a.functions) {
    const Node* def = findNode(a.ast, f.node);
    f.callees.clear();
    f.refsEnclosing = false;
    for (const auto& st : def->children) {
      collectCalls(st, a, f.callees);
      if (refsEnclosingScope(st, a, f.scope)) f.refsEnclosing = true;
    }
    std::sort(f.callees.begin(), f.callees.end());
    f.callees.erase(std::unique(f.callees.begin(), f.callees.end()), f.callees.end());
  }
  // Tarjan's strongly connected components.
  int n = static_cast<int>(a.functions.size());
  std::vector<int> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
  std::vector<bool> onStack(static_cast<std::size_t>(n), false);
  std::vector<int> stack;
  int counter = 0;
  std::function<void(int)> strong = [&](int v) {
    at(index, v) = at(low, v) = counter++;
    stack.push_back(v);
    onStack[static_cast<std::size_t>(v)] = true;
    for (int w : at(a.functions, v).callees) {
      if (at(index, w) < 0) {
        strong(w);
        at(low, v) = std::min(at(low, v), at(low, w));
      } else if (onStack[static_cast<std::size_t>(w)]) {
        at(low, v) = std::min(at(low, v), at(index, w));
      }
    }
    if (at(low, v) == at(index, v)) {
      std::vector<int> comp;
      int w;
      do {
        w = stack.back();
        stack.pop_back();
        onStack[static_cast<std::size_t>(w)] = false;
        comp.push_back(w);
      } while (w != v);
      bool selfLoop = false;
      for (int c : at(a.functions, v).callees) selfLoop = selfLoop || c == v;
      for (int c : comp) at(a.functions, c).recursive = comp.size() > 1 || selfLoop;
    }
  };
  for (int v = 0; v < n; ++v)
    if (at(index, v) < 0) strong(v);
}

bool staticEligible(const FunctionInfo& f, const ProgramAnalysis& a) {
  const FrameLayout& frame = a.frameOf(f.index);
  if (frame.slotCount != frame.argCount) return false;
  if (f.recursive || f.refsEnclosing) return false;
  if (f.symbol < 0) return false;
  const SymbolEntry& s = a.symbols[static_cast<std::size_t>(f.symbol)];
  return s.defFunction == f.index && s.otherBindings == 0 && !s.deleted;
}

void checkDecorators(const ProgramAnalysis& a) {
  for (const auto& f : a.functions) {
    if (!f.decoratedDynamic || f.depth == 1) continue;
    const FunctionInfo& top = a.functions[static_cast<std::size_t>(f.topLevel)];
    const Node* def = findNode(a.ast, f.node);
    bool insideDynamic = false;
    for (int s = f.parentScope; s > 0; s = a.scopes[static_cast<std::size_t>(s)].parent) {
      int fn = a.scopes[static_cast<std::size_t>(s)].function;
      if (fn >= 0 && a.functions[static_cast<std::size_t>(fn)].decoratedDynamic) insideDynamic = true;
    }
    (void)top;
    if (insideDynamic)
      fail(ErrorCode::NestedDynamic, def->span.begin,
           "'" + f.name + "' is nested in a dynamic function and cannot be marked @dynamic itself");
    fail(ErrorCode::NonTopLevelDynamic, def->span.begin,
         "only top-level functions may be marked @dynamic; '" + f.qualName + "' is nested");
  }
}

}  // namespace

ProgramAnalysis resolveScopes(Node ast) {
  ProgramAnalysis a;
  a.ast = std::move(ast);
  ScopeBuilder(a).run();
  return a;
}

void inferKinds(ProgramAnalysis& analysis, const std::map<std::string, Kind>& hints) {
  Inference(analysis, hints).run();
  buildCallGraph(analysis);
}

int computeMaxLexLevels(const ProgramAnalysis& analysis) {
  int depth = 0;
  for (const auto& s : analysis.scopes) depth = std::max(depth, s.depth);
  return depth + 1;
}

DispatchClass classifyDispatch(int function, const ProgramAnalysis& analysis) {
  const FunctionInfo& f = analysis.functions.at(static_cast<std::size_t>(function));
  if (f.decoratedDynamic) return {DispatchMode::DynamicLoad};
  if (staticEligible(f, analysis)) return {DispatchMode::StaticDispatch};
  return {DispatchMode::DynamicDispatch};
}

std::pair<std::vector<int>, std::vector<int>> partitionDynamic(ProgramAnalysis& analysis) {
  checkDecorators(analysis);
  std::vector<int> resident, dynamic;
  for (const auto& f : analysis.functions) {
    if (f.depth != 1) continue;
    (f.dispatch == DispatchMode::DynamicLoad ? dynamic : resident).push_back(f.index);
  }
  analysis.residentFunctions = resident;
  analysis.dynamicFunctions = dynamic;
  return {resident, dynamic};
}

ProgramAnalysis analyze(Node ast, const AnalysisOptions& options) {
  ProgramAnalysis a = resolveScopes(std::move(ast));
  checkDecorators(a);
  inferKinds(a, options.kindHints);
  a.policy = options.policy;
  for (auto& f : a.functions) {
    bool eligible = staticEligible(f, a);
    switch (options.policy) {
      case DispatchPolicy::Auto:
        f.dispatch = classifyDispatch(f.index, a).mode;
        break;
      case DispatchPolicy::Static:
        f.dispatch = eligible ? DispatchMode::StaticDispatch : DispatchMode::DynamicDispatch;
        break;
      case DispatchPolicy::Dynamic:
        f.dispatch = DispatchMode::DynamicDispatch;
        break;
      case DispatchPolicy::Load:
        if (f.depth == 1)
          f.dispatch = DispatchMode::DynamicLoad;
        else
          f.dispatch = eligible ? DispatchMode::StaticDispatch : DispatchMode::DynamicDispatch;
        break;
    }
  }
  for (auto& s : a.symbols) {
    if (s.defFunction < 0) continue;
    const FunctionInfo& f = a.functions[static_cast<std::size_t>(s.defFunction)];
    s.isDynamic = f.dispatch == DispatchMode::DynamicLoad;
    s.isDeferred = f.decoratedDeferred;
  }
  partitionDynamic(a);
  int needed = computeMaxLexLevels(a);
  if (options.maxLexLevels) {
    if (*options.maxLexLevels < needed)
      fail(ErrorCode::LexLevelsInsufficient, {},
           "program needs " + std::to_string(needed) + " lexical levels, " +
               std::to_string(*options.maxLexLevels) + " requested");
    a.maxLexLevels = *options.maxLexLevels;
  } else {
    a.maxLexLevels = needed;
  }
  return a;
}

std::string dumpSymbols(const ProgramAnalysis& analysis) {
  std::ostringstream out;
  for (const auto& scope : analysis.scopes) {
    for (int id : scope.symbols) {
      const SymbolEntry& s = analysis.symbols[static_cast<std::size_t>(id)];
      out << s.name << ' ' << s.defLevel << ' ' << s.offset << ' ' << kindName(s.kind) << ' ';
      if (s.defFunction >= 0)
        out << dispatchName(analysis.functions[static_cast<std::size_t>(s.defFunction)].dispatch);
      else
        out << '-';
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace microdyn
