#include "microdyn/refinterp.hpp"

#include <chrono>
#include <memory>
#include <variant>

#include "microdyn/numeric.hpp"
#include "microdyn/parser.hpp"

namespace microdyn {
namespace {

struct Frame;
struct Closure;
struct VectorBox;
struct ComplexBox {
  double re = 0;
  double im = 0;
};
struct Str {
  std::string text;
};

using ProcRef = std::shared_ptr<Closure>;
using VectorRef = std::shared_ptr<VectorBox>;
using ComplexRef = std::shared_ptr<ComplexBox>;

/// monostate is the value of a value-less call.
using Value = std::variant<std::monostate, std::int64_t, double, Str, VectorRef, ProcRef, ComplexRef>;

struct VectorBox {
  Kind elem = Kind::Int;
  std::vector<Value> items;
};

struct Closure {
  int function = -1;
  std::shared_ptr<Frame> defFrame;
  /// Only code fetched from the host can be invalidated by `del`.
  bool loaded = false;
  bool live = true;
};

struct Frame {
  int scope = 0;
  std::shared_ptr<Frame> parent;
  std::map<std::string, Value> slots;
};

Kind kindOfValue(const Value& v) {
  switch (v.index()) {
    case 1: return Kind::Int;
    case 2: return Kind::Real;
    case 3: return Kind::Str;
    case 4: return Kind::Vector;
    case 5: return Kind::Proc;
    case 6: return Kind::Complex;
    default: return Kind::Object;
  }
}

Value zeroOf(Kind k) {
  switch (k) {
    case Kind::Int: return std::int64_t{0};
    case Kind::Real: return 0.0;
    case Kind::Vector: return VectorRef{};
    case Kind::Proc: return ProcRef{};
    case Kind::Complex: return ComplexRef{};
    case Kind::Str: return Str{};
    case Kind::Object: return std::monostate{};
  }
  return std::monostate{};
}

Value coerce(Value v, Kind k) {
  if (k == Kind::Real) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  }
  return v;
}

double asReal(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&v)) return *d;
  throw InterpError("RuntimeError");
}

std::int64_t asInt(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw InterpError("RuntimeError");
}

/// Control flow out of a statement list.
struct Flow {
  bool returned = false;
  Value value;
};

class Interpreter {
 public:
  Interpreter(const ProgramAnalysis& a, const InterpOptions& o) : a_(a), opts_(o) {}

  InterpResult run() {
    module_ = std::make_shared<Frame>();
    module_->scope = 0;
    try {
      execBlock(a_.ast.children, module_);
    } catch (const InterpError& e) {
      result_.error = e.name();
    }
    return std::move(result_);
  }

 private:
  // ---- names -----------------------------------------------------------

  const SymbolEntry& symbol(int s) const { return a_.symbols[static_cast<std::size_t>(s)]; }
  const FunctionInfo& function(int f) const { return a_.functions[static_cast<std::size_t>(f)]; }

  /// Walks the static chain to the activation owning `sym`'s scope.
  Frame& owner(int sym, const std::shared_ptr<Frame>& frame) const {
    int scope = symbol(sym).scope;
    for (Frame* f = frame.get(); f; f = f->parent.get())
      if (f->scope == scope) return *f;
    return *module_;
  }

  Value load(int sym, const std::shared_ptr<Frame>& frame) const {
    Frame& f = owner(sym, frame);
    const SymbolEntry& s = symbol(sym);
    auto it = f.slots.find(s.name);
    return it == f.slots.end() ? zeroOf(s.kind) : it->second;
  }

  void store(int sym, Value v, const std::shared_ptr<Frame>& frame) {
    const SymbolEntry& s = symbol(sym);
    observe(sym, v);
    owner(sym, frame).slots[s.name] = coerce(std::move(v), s.kind);
  }

  void observe(int sym, const Value& v) {
    const SymbolEntry& s = symbol(sym);
    Kind k = kindOfValue(v);
    if (k == Kind::Object) return;
    auto key = std::make_pair(a_.scopes[static_cast<std::size_t>(s.scope)].qualName, s.name);
    auto [it, fresh] = result_.kindTrace.emplace(key, k);
    if (!fresh && it->second != k && (it->second == Kind::Int || it->second == Kind::Real) &&
        (k == Kind::Int || k == Kind::Real))
      it->second = Kind::Real;
  }

  int symbolOf(const Node& n) const { return a_.ref(n).symbol; }

  // ---- procs -----------------------------------------------------------

  ProcRef makeProc(int fn, std::shared_ptr<Frame> defFrame) const {
    auto p = std::make_shared<Closure>();
    p->function = fn;
    p->defFrame = std::move(defFrame);
    return p;
  }

  ProcRef loadProc(int fn) {
    result_.loadTrace.push_back(function(fn).name);
    ProcRef p = makeProc(fn, module_);
    p->loaded = true;
    return p;
  }

  Value callProc(const ProcRef& p, std::vector<Value> args) {
    if (!p || !p->live) throw InterpError("UnloadedProcError");
    if (depth_ >= opts_.maxCallDepth) throw InterpError("FrameOverflow");
    const FunctionInfo& f = function(p->function);
    const Scope& scope = a_.scopes[static_cast<std::size_t>(f.scope)];
    auto frame = std::make_shared<Frame>();
    frame->scope = f.scope;
    frame->parent = p->defFrame;
    for (std::size_t i = 0; i < args.size(); ++i) store(scope.symbols[i], std::move(args[i]), frame);
    const Node& def = nodeById(f.node);
    ++depth_;
    Flow flow = execBlock(def.children, frame);
    --depth_;
    // Nested procs never outlive their frame; dropping the slots breaks the
    // frame/closure reference cycle.
    frame->slots.clear();
    if (!f.returnsValue) return std::int64_t{0};
    if (!flow.returned || std::holds_alternative<std::monostate>(flow.value)) return zeroOf(f.returnKind);
    return coerce(std::move(flow.value), f.returnKind);
  }

  const Node& nodeById(int id) {
    if (nodes_.empty()) index(a_.ast);
    return *nodes_.at(static_cast<std::size_t>(id));
  }

  void index(const Node& n) {
    if (n.id >= 0) {
      if (nodes_.size() <= static_cast<std::size_t>(n.id)) nodes_.resize(static_cast<std::size_t>(n.id) + 1);
      nodes_[static_cast<std::size_t>(n.id)] = &n;
    }
    for (const auto& c : n.children) index(c);
  }

  // ---- statements ------------------------------------------------------

  Flow execBlock(const std::vector<Node>& body, const std::shared_ptr<Frame>& frame) {
    for (const auto& st : body) {
      Flow f = exec(st, frame);
      if (f.returned) return f;
    }
    return {};
  }

  Flow exec(const Node& st, const std::shared_ptr<Frame>& frame) {
    if (opts_.maxSteps && ++steps_ > opts_.maxSteps) throw InterpError("StepLimit");
    switch (st.kind) {
      case NodeKind::Assign:
        assign(st.children[0], st.children[1], frame);
        return {};
      case NodeKind::AugAssign:
        augAssign(st, frame);
        return {};
      case NodeKind::ExprStmt:
        eval(st.children[0], frame);
        return {};
      case NodeKind::Return: {
        Flow f;
        f.returned = true;
        if (!st.children.empty()) f.value = eval(st.children[0], frame);
        return f;
      }
      case NodeKind::If:
        if (truth(eval(st.children[0], frame))) return execBlock(st.children[1].children, frame);
        if (st.children.size() > 2) return execBlock(st.children[2].children, frame);
        return {};
      case NodeKind::While:
        while (truth(eval(st.children[0], frame))) {
          Flow f = execBlock(st.children[1].children, frame);
          if (f.returned) return f;
          if (opts_.maxSteps && ++steps_ > opts_.maxSteps) throw InterpError("StepLimit");
        }
        return {};
      case NodeKind::For:
        return forRange(st, frame);
      case NodeKind::Delete: {
        int sym = symbolOf(st.children[0]);
        Frame& f = owner(sym, frame);
        auto it = f.slots.find(symbol(sym).name);
        if (it != f.slots.end()) {
          if (auto* p = std::get_if<ProcRef>(&it->second); p && *p && (*p)->loaded) (*p)->live = false;
          it->second = ProcRef{};
        }
        return {};
      }
      case NodeKind::FunctionDef: {
        int fn = a_.nodeFunction[static_cast<std::size_t>(st.id)];
        const FunctionInfo& f = function(fn);
        ProcRef p;
        if (f.decoratedDeferred)
          p = nullptr;
        else if (f.dispatch == DispatchMode::DynamicLoad)
          p = loadProc(fn);
        else
          p = makeProc(fn, frame);
        store(f.symbol, p, frame);
        return {};
      }
      case NodeKind::Block:
        return execBlock(st.children, frame);
      default:
        return {};
    }
  }

  Flow forRange(const Node& st, const std::shared_ptr<Frame>& frame) {
    const Node& call = st.children[1];
    std::size_t argc = call.children.size() - 1;
    std::int64_t start = 0, stop = 0, step = 1;
    if (argc == 1) {
      stop = asInt(eval(call.children[1], frame));
    } else {
      start = asInt(eval(call.children[1], frame));
      stop = asInt(eval(call.children[2], frame));
      if (argc == 3) step = asInt(eval(call.children[3], frame));
    }
    if (step == 0) throw InterpError("ValueError");
    int sym = symbolOf(st.children[0]);
    for (std::int64_t i = start; step > 0 ? i < stop : i > stop; i = wrapAdd(i, step)) {
      store(sym, i, frame);
      Flow f = execBlock(st.children[2].children, frame);
      if (f.returned) return f;
    }
    return {};
  }

  void assign(const Node& target, const Node& valueNode, const std::shared_ptr<Frame>& frame) {
    switch (target.kind) {
      case NodeKind::Name: {
        Value v = eval(valueNode, frame);
        if (a_.ref(target).kind == Kind::Object) return;
        store(symbolOf(target), std::move(v), frame);
        return;
      }
      case NodeKind::Index: {
        Value v = eval(valueNode, frame);
        VectorRef vec = vectorOf(eval(target.children[0], frame));
        std::int64_t i = asInt(eval(target.children[1], frame));
        element(*vec, i) = coerce(std::move(v), vec->elem);
        return;
      }
      case NodeKind::Attribute: {
        double v = asReal(eval(valueNode, frame));
        field(eval(target.children[0], frame), target.text) = v;
        return;
      }
      default:
        throw InterpError("RuntimeError");
    }
  }

  void augAssign(const Node& st, const std::shared_ptr<Frame>& frame) {
    const Node& target = st.children[0];
    switch (target.kind) {
      case NodeKind::Name: {
        int sym = symbolOf(target);
        Value cur = load(sym, frame);
        Value rhs = eval(st.children[1], frame);
        store(sym, arith(st.text, cur, rhs), frame);
        return;
      }
      case NodeKind::Index: {
        VectorRef vec = vectorOf(eval(target.children[0], frame));
        std::int64_t i = asInt(eval(target.children[1], frame));
        Value rhs = eval(st.children[1], frame);
        Value& slot = element(*vec, i);
        slot = coerce(arith(st.text, slot, rhs), vec->elem);
        return;
      }
      case NodeKind::Attribute: {
        Value base = eval(target.children[0], frame);
        Value rhs = eval(st.children[1], frame);
        double& slot = field(base, target.text);
        slot = asReal(arith(st.text, slot, rhs));
        return;
      }
      default:
        throw InterpError("RuntimeError");
    }
  }

  // ---- expressions -----------------------------------------------------

  static VectorRef vectorOf(const Value& v) {
    auto* p = std::get_if<VectorRef>(&v);
    if (!p || !*p) throw InterpError("RuntimeError");
    return *p;
  }

  static Value& element(VectorBox& v, std::int64_t i) {
    auto len = static_cast<std::int64_t>(v.items.size());
    if (i < 0) i += len;
    if (i < 0 || i >= len) throw InterpError("IndexError");
    return v.items[static_cast<std::size_t>(i)];
  }

  static double& field(const Value& v, const std::string& name) {
    auto* p = std::get_if<ComplexRef>(&v);
    if (!p || !*p) throw InterpError("RuntimeError");
    return name == "real" ? (*p)->re : (*p)->im;
  }

  static bool truth(const Value& v) {
    switch (v.index()) {
      case 1: return std::get<std::int64_t>(v) != 0;
      case 2: return std::get<double>(v) != 0;
      case 3: return !std::get<Str>(v).text.empty();
      case 4: return !vectorOf(v)->items.empty();
      case 5: return std::get<ProcRef>(v) != nullptr;
      case 6: return std::get<ComplexRef>(v) != nullptr;
      default: throw InterpError("RuntimeError");
    }
  }

  static Value arith(const std::string& op, const Value& l, const Value& r) {
    bool ints = std::holds_alternative<std::int64_t>(l) && std::holds_alternative<std::int64_t>(r);
    if (op == "/") {
      double d = asReal(r);
      if (d == 0) throw InterpError("ZeroDivisionError");
      return asReal(l) / d;
    }
    if (op == "//" || op == "%") {
      std::int64_t b = asInt(r);
      if (b == 0) throw InterpError("ZeroDivisionError");
      return op == "//" ? floorDiv(asInt(l), b) : floorMod(asInt(l), b);
    }
    if (ints) {
      std::int64_t a = std::get<std::int64_t>(l), b = std::get<std::int64_t>(r);
      if (op == "+") return wrapAdd(a, b);
      if (op == "-") return wrapSub(a, b);
      if (op == "*") return wrapMul(a, b);
    } else {
      double a = asReal(l), b = asReal(r);
      if (op == "+") return a + b;
      if (op == "-") return a - b;
      if (op == "*") return a * b;
    }
    throw InterpError("RuntimeError");
  }

  static Value compare(const std::string& op, const Value& l, const Value& r) {
    bool result;
    auto cmp = [&](auto a, auto b) {
      if (op == "<") return a < b;
      if (op == "<=") return a <= b;
      if (op == ">") return a > b;
      if (op == ">=") return a >= b;
      if (op == "==") return a == b;
      if (op == "!=") return a != b;
      throw InterpError("RuntimeError");
    };
    if (std::holds_alternative<std::int64_t>(l) && std::holds_alternative<std::int64_t>(r))
      result = cmp(std::get<std::int64_t>(l), std::get<std::int64_t>(r));
    else
      result = cmp(asReal(l), asReal(r));
    return std::int64_t{result ? 1 : 0};
  }

  Value eval(const Node& e, const std::shared_ptr<Frame>& frame) {
    switch (e.kind) {
      case NodeKind::IntLit: return e.intValue;
      case NodeKind::RealLit: return e.realValue;
      case NodeKind::StringLit: return Str{e.text};
      case NodeKind::Name: return load(symbolOf(e), frame);
      case NodeKind::ListLit: {
        auto v = std::make_shared<VectorBox>();
        v->elem = a_.expr(e).elemKind;
        for (const auto& c : e.children) v->items.push_back(coerce(eval(c, frame), v->elem));
        return v;
      }
      case NodeKind::BinOp: return binOp(e, frame);
      case NodeKind::UnaryOp: {
        Value v = eval(e.children[0], frame);
        if (e.text == "not") return std::int64_t{truth(v) ? 0 : 1};
        if (e.text == "+") return v;
        if (auto* i = std::get_if<std::int64_t>(&v)) return wrapNeg(*i);
        return -asReal(v);
      }
      case NodeKind::Compare: {
        Value l = eval(e.children[0], frame);
        Value r = eval(e.children[1], frame);
        return compare(e.text, l, r);
      }
      case NodeKind::Index: {
        VectorRef v = vectorOf(eval(e.children[0], frame));
        std::int64_t i = asInt(eval(e.children[1], frame));
        return element(*v, i);
      }
      case NodeKind::Attribute: return field(eval(e.children[0], frame), e.text);
      case NodeKind::Call: return call(e, frame);
      default: throw InterpError("RuntimeError");
    }
  }

  Value binOp(const Node& e, const std::shared_ptr<Frame>& frame) {
    auto isRepeat = [](const Node& c) { return c.kind == NodeKind::ListLit && c.children.size() == 1; };
    if (e.text == "*" && (isRepeat(e.children[0]) || isRepeat(e.children[1]))) {
      bool leftList = isRepeat(e.children[0]);
      Kind elem = a_.expr(e).elemKind;
      Value first = eval(leftList ? e.children[0].children[0] : e.children[0], frame);
      Value second = eval(leftList ? e.children[1] : e.children[1].children[0], frame);
      std::int64_t count = asInt(leftList ? second : first);
      auto v = std::make_shared<VectorBox>();
      v->elem = elem;
      v->items.assign(static_cast<std::size_t>(count < 0 ? 0 : count), coerce(leftList ? first : second, elem));
      return v;
    }
    if (e.text == "and" || e.text == "or") {
      // Both operands share the joined kind, as in the compiled temporary.
      Kind k = a_.expr(e).kind;
      Value l = coerce(eval(e.children[0], frame), k);
      if (truth(l) == (e.text == "or")) return l;
      return coerce(eval(e.children[1], frame), k);
    }
    Value l = eval(e.children[0], frame);
    Value r = eval(e.children[1], frame);
    return arith(e.text, l, r);
  }

  Value call(const Node& e, const std::shared_ptr<Frame>& frame) {
    auto it = a_.callTargets.find(e.id);
    CallTarget target = it == a_.callTargets.end() ? CallTarget::User : it->second;
    switch (target) {
      case CallTarget::Print: {
        std::vector<Value> args;
        for (std::size_t i = 1; i < e.children.size(); ++i) args.push_back(eval(e.children[i], frame));
        std::string line;
        for (std::size_t i = 0; i < args.size(); ++i) {
          if (i) line += ' ';
          line += format(args[i]);
        }
        result_.output += line + '\n';
        return std::monostate{};
      }
      case CallTarget::Mark:
        result_.marks.push_back(
            {e.children[1].text, std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()});
        return std::monostate{};
      case CallTarget::Len:
        return static_cast<std::int64_t>(vectorOf(eval(e.children[1], frame))->items.size());
      case CallTarget::LoadFunction: {
        int fn = a_.loadTargets.at(e.id);
        if (function(fn).dispatch == DispatchMode::DynamicLoad) return loadProc(fn);
        return makeProc(fn, module_);
      }
      case CallTarget::User: break;
    }
    Value callee = eval(e.children[0], frame);
    std::vector<Value> args;
    for (std::size_t i = 1; i < e.children.size(); ++i) args.push_back(eval(e.children[i], frame));
    auto* p = std::get_if<ProcRef>(&callee);
    if (!p) throw InterpError("RuntimeError");
    return callProc(*p, std::move(args));
  }

  static std::string format(const Value& v) {
    switch (v.index()) {
      case 1: return std::to_string(std::get<std::int64_t>(v));
      case 2: return formatReal(std::get<double>(v));
      case 3: return std::get<Str>(v).text;
      case 4: {
        VectorRef vec = vectorOf(v);
        std::string out = "[";
        for (std::size_t i = 0; i < vec->items.size(); ++i) {
          if (i) out += ", ";
          out += format(vec->items[i]);
        }
        return out + "]";
      }
      case 5: return "<function>";
      default: throw InterpError("RuntimeError");
    }
  }

  const ProgramAnalysis& a_;
  InterpOptions opts_;
  InterpResult result_;
  std::shared_ptr<Frame> module_;
  std::vector<const Node*> nodes_;
  int depth_ = 0;
  std::uint64_t steps_ = 0;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

std::optional<double> InterpResult::markInterval(const std::string& from, const std::string& to) const {
  std::optional<double> a, b;
  for (const auto& m : marks) {
    if (m.label == from && !a) a = m.seconds;
    if (m.label == to) b = m.seconds;
  }
  if (!a || !b) return std::nullopt;
  return *b - *a;
}

InterpResult interpret(const ProgramAnalysis& analysis, const InterpOptions& options) {
  return Interpreter(analysis, options).run();
}

InterpResult interpretSource(const std::string& name, const std::string& text, DispatchPolicy policy,
                             const InterpOptions& options) {
  AnalysisOptions ao;
  ao.policy = policy;
  return interpret(analyze(parseSource(SourceProgram(name, text)), ao), options);
}

}  // namespace microdyn
