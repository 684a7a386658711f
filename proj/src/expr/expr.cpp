#include "concircle/expr.hpp"

#include <bit>
#include <cmath>
#include <deque>
#include <mutex>
#include <numeric>
#include <unordered_set>

#include "concircle/program.hpp"
#include "node.hpp"

namespace concircle {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : ExprError(what + " at byte " + std::to_string(offset)), offset_(offset) {}

Rational Rational::make(std::int64_t num, std::int64_t den) {
  if (den == 0) throw ExprError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{num, den};
}

Rational operator-(Rational a, Rational b) {
  return Rational::make(a.num * b.den - b.num * a.den, a.den * b.den);
}

// ---------------------------------------------------------------------------
// Variable interning

namespace {

struct Interner {
  std::mutex mutex;
  std::unordered_map<std::string, VarId> ids;
  std::deque<std::string> names;  // deque: references stay valid on growth
};

Interner& interner() {
  static auto* table = new Interner();
  return *table;
}

}  // namespace

VarId intern(std::string_view name) {
  auto& in = interner();
  std::lock_guard lock(in.mutex);
  auto [it, inserted] = in.ids.try_emplace(std::string(name), static_cast<VarId>(in.names.size()));
  if (inserted) in.names.emplace_back(name);
  return it->second;
}

const std::string& var_name(VarId id) {
  auto& in = interner();
  std::lock_guard lock(in.mutex);
  if (id >= in.names.size()) throw ExprError("unknown variable id " + std::to_string(id));
  return in.names[id];
}

// ---------------------------------------------------------------------------
// Hash-consing

namespace detail {
namespace {

struct Key {
  Op op;
  std::uint64_t bits;
  VarId var;
  Rational exponent;
  const Node* a;
  const Node* b;

  bool operator==(const Key& o) const {
    return op == o.op && bits == o.bits && var == o.var && exponent == o.exponent && a == o.a &&
           b == o.b;
  }
};

std::size_t combine(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

// Hash of the structure, not of addresses, so iteration order of anything
// keyed on it does not depend on allocation.
std::size_t structural_hash(Op op, std::uint64_t bits, VarId var, Rational p, const Node* a,
                            const Node* b) {
  std::size_t h = std::hash<int>{}(static_cast<int>(op));
  h = combine(h, std::hash<std::uint64_t>{}(bits));
  h = combine(h, var);
  h = combine(h, std::hash<std::int64_t>{}(p.num));
  h = combine(h, std::hash<std::int64_t>{}(p.den));
  h = combine(h, a != nullptr ? a->hash : 0);
  h = combine(h, b != nullptr ? b->hash : 0);
  return h;
}

struct KeyHash {
  std::size_t operator()(const Key& k) const {
    return structural_hash(k.op, k.bits, k.var, k.exponent, k.a, k.b);
  }
};

struct NodeTable {
  std::mutex mutex;
  std::unordered_map<Key, std::weak_ptr<const Node>, KeyHash> nodes;
};

NodeTable& table() {
  static auto* t = new NodeTable();
  return *t;
}

Key key_of(const Node& n) {
  return Key{n.op, std::bit_cast<std::uint64_t>(n.value), n.var, n.exponent, n.a.id(), n.b.id()};
}

struct NodeDeleter {
  void operator()(const Node* n) const {
    {
      auto& t = table();
      std::lock_guard lock(t.mutex);
      auto it = t.nodes.find(key_of(*n));
      if (it != t.nodes.end() && it->second.expired()) t.nodes.erase(it);
    }
    delete n;  // releases children outside the lock
  }
};

}  // namespace

Expr make_node(Op op, double value, VarId var, Rational exponent, const Expr& a, const Expr& b) {
  // -0.0 and 0.0 fold to one node.
  if (op == Op::Const && value == 0.0) value = 0.0;
  const Key key{op, std::bit_cast<std::uint64_t>(value), var, exponent, a.id(), b.id()};
  auto& t = table();
  std::lock_guard lock(t.mutex);
  auto it = t.nodes.find(key);
  if (it != t.nodes.end()) {
    if (auto live = it->second.lock()) return Expr(std::move(live));
  }
  auto* n = new Node();
  n->op = op;
  n->value = value;
  n->var = var;
  n->exponent = exponent;
  n->a = a;
  n->b = b;
  n->mask = (op == Op::Var ? (std::uint64_t{1} << (var % 64)) : 0) |
            (a.id() != nullptr ? a.var_mask() : 0) | (b.id() != nullptr ? b.var_mask() : 0);
  n->hash = structural_hash(op, key.bits, var, exponent, a.id(), b.id());
  std::shared_ptr<const Node> sp(n, NodeDeleter{});
  t.nodes[key] = sp;
  return Expr(std::move(sp));
}

const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Abs: return "abs";
    default: return "";
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Expr basics

namespace {

const Expr& empty() {
  static const Expr e{std::shared_ptr<const Node>{}};
  return e;
}

Expr make_const(double v) { return detail::make_node(Op::Const, v, 0, {}, empty(), empty()); }

const Expr& zero_singleton() {
  static const Expr z = make_const(0.0);
  return z;
}

Expr unary(Op op, const Expr& a) { return detail::make_node(op, 0.0, 0, {}, a, empty()); }
Expr binary(Op op, const Expr& a, const Expr& b) { return detail::make_node(op, 0.0, 0, {}, a, b); }

}  // namespace

Expr::Expr() : node_(zero_singleton().node_) {}
Expr::Expr(double value) : Expr(make_const(value)) {}

Expr Expr::constant(double value) { return make_const(value); }
Expr Expr::variable(std::string_view name) { return variable(intern(name)); }
Expr Expr::variable(VarId id) { return detail::make_node(Op::Var, 0.0, id, {}, empty(), empty()); }

Op Expr::op() const noexcept { return node_->op; }

double Expr::constant_value() const {
  if (node_->op != Op::Const) throw ExprError("not a constant");
  return node_->value;
}

VarId Expr::var() const {
  if (node_->op != Op::Var) throw ExprError("not a variable");
  return node_->var;
}

Rational Expr::exponent() const {
  if (node_->op != Op::Pow) throw ExprError("not a power");
  return node_->exponent;
}

const Expr& Expr::arg(int index) const { return index == 0 ? node_->a : node_->b; }

bool Expr::is_zero() const noexcept { return node_->op == Op::Const && node_->value == 0.0; }
bool Expr::is_one() const noexcept { return node_->op == Op::Const && node_->value == 1.0; }
std::uint64_t Expr::var_mask() const noexcept { return node_->mask; }
bool Expr::may_depend_on(VarId id) const noexcept {
  return (node_->mask & (std::uint64_t{1} << (id % 64))) != 0;
}

std::size_t Expr::node_count() const {
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{node_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n == nullptr || !seen.insert(n).second) continue;
    stack.push_back(n->a.id());
    stack.push_back(n->b.id());
  }
  return seen.size();
}

// ---------------------------------------------------------------------------
// Constructors with constant folding

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return make_const(a.constant_value() + b.constant_value());
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  // Exact cancellation of shared nodes: x + (-x) and (-x) + x.
  if (b.op() == Op::Neg && b.arg(0).id() == a.id()) return Expr();
  if (a.op() == Op::Neg && a.arg(0).id() == b.id()) return Expr();
  return binary(Op::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return make_const(a.constant_value() - b.constant_value());
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  if (a.id() == b.id()) return Expr();
  return binary(Op::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return make_const(a.constant_value() * b.constant_value());
  if (a.is_zero() || b.is_zero()) return Expr();
  if (a.is_one()) return b;
  if (b.is_one()) return a;
  if (a.is_constant() && a.constant_value() == -1.0) return -b;
  if (b.is_constant() && b.constant_value() == -1.0) return -a;
  return binary(Op::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
    return make_const(a.constant_value() / b.constant_value());
  if (b.is_one()) return a;
  return binary(Op::Div, a, b);
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return make_const(-a.constant_value());
  if (a.op() == Op::Neg) return a.arg(0);
  return unary(Op::Neg, a);
}

Expr& operator+=(Expr& a, const Expr& b) { return a = a + b; }
Expr& operator-=(Expr& a, const Expr& b) { return a = a - b; }

Expr sin(const Expr& a) {
  if (a.is_constant()) return make_const(std::sin(a.constant_value()));
  return unary(Op::Sin, a);
}

Expr cos(const Expr& a) {
  if (a.is_constant()) return make_const(std::cos(a.constant_value()));
  return unary(Op::Cos, a);
}

Expr exp(const Expr& a) {
  if (a.is_constant()) return make_const(std::exp(a.constant_value()));
  return unary(Op::Exp, a);
}

Expr log(const Expr& a) {
  if (a.is_constant() && a.constant_value() > 0.0) return make_const(std::log(a.constant_value()));
  return unary(Op::Log, a);
}

Expr sqrt(const Expr& a) {
  if (a.is_constant() && a.constant_value() >= 0.0) return make_const(std::sqrt(a.constant_value()));
  return unary(Op::Sqrt, a);
}

Expr abs(const Expr& a) {
  if (a.is_constant()) return make_const(std::fabs(a.constant_value()));
  return unary(Op::Abs, a);
}

namespace detail {

// Real-valued x^(p/q); odd q admits negative bases. Returns NaN on a domain
// violation so callers can decide how to report it.
double rational_pow(double x, Rational p) {
  if (x == 0.0) return p.num > 0 ? 0.0 : (p.num == 0 ? 1.0 : std::nan(""));
  if (p.is_integer()) return std::pow(x, static_cast<double>(p.num));
  if (x < 0.0) {
    if (p.den % 2 == 0) return std::nan("");
    const double mag = std::pow(-x, p.value());
    return (p.num % 2 != 0) ? -mag : mag;
  }
  return std::pow(x, p.value());
}

}  // namespace detail

Expr pow(const Expr& base, Rational exponent) {
  if (exponent.num == 0) return Expr(1.0);
  if (exponent.num == 1 && exponent.den == 1) return base;
  if (base.is_constant()) {
    const double v = detail::rational_pow(base.constant_value(), exponent);
    if (!std::isnan(v)) return make_const(v);
  }
  return detail::make_node(Op::Pow, 0.0, 0, exponent, base, empty());
}

Expr square(const Expr& a) { return pow(a, Rational{2, 1}); }

// ---------------------------------------------------------------------------
// Printing

namespace {

int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, bool wrap, std::string& out) {
  if (wrap) out += '(';
  print(e, out);
  if (wrap) out += ')';
}

void print(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Const: {
      const double v = e.constant_value();
      if (v < 0.0) {
        out += "(-";
        out += format_double(-v);
        out += ')';
      } else {
        out += format_double(v);
      }
      return;
    }
    case Op::Var: out += var_name(e.var()); return;
    case Op::Neg:
      out += '-';
      print_wrapped(e.arg(0), precedence(e.arg(0)) < 3, out);
      return;
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Log:
    case Op::Sqrt:
    case Op::Abs:
      out += detail::function_name(e.op());
      out += '(';
      print(e.arg(0), out);
      out += ')';
      return;
    case Op::Pow: {
      print_wrapped(e.arg(0), precedence(e.arg(0)) < 5, out);
      out += '^';
      const Rational p = e.exponent();
      if (p.is_integer() && p.num >= 0) {
        out += std::to_string(p.num);
      } else {
        out += '(' + std::to_string(p.num);
        if (!p.is_integer()) out += '/' + std::to_string(p.den);
        out += ')';
      }
      return;
    }
    case Op::Add:
    case Op::Sub:
      print_wrapped(e.arg(0), precedence(e.arg(0)) < 1, out);
      out += e.op() == Op::Add ? '+' : '-';
      print_wrapped(e.arg(1), precedence(e.arg(1)) <= 1, out);
      return;
    case Op::Mul:
    case Op::Div:
      print_wrapped(e.arg(0), precedence(e.arg(0)) < 2, out);
      out += e.op() == Op::Mul ? '*' : '/';
      print_wrapped(e.arg(1), precedence(e.arg(1)) <= 2, out);
      return;
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Differentiation

namespace {

class Deriver {
 public:
  Deriver(const Tangent& t, DeriveCache* shared) : tangent_(t), shared_(shared) {}

  Expr operator()(const Expr& e) {
    if ((e.var_mask() & tangent_.support) == 0) return Expr();
    if (shared_ != nullptr) {
      if (const Expr* hit = shared_->find(e)) return *hit;
      Expr d = compute(e);
      shared_->insert(e, d);
      return d;
    }
    if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
    Expr d = compute(e);
    memo_.emplace(e.id(), d);
    return d;
  }

 private:
  Expr compute(const Expr& e) {
    switch (e.op()) {
      case Op::Const: return Expr();
      case Op::Var: return tangent_.component(e.var());
      case Op::Neg: return -(*this)(e.arg(0));
      case Op::Sin: return chain(cos(e.arg(0)), e.arg(0));
      case Op::Cos: return -chain(sin(e.arg(0)), e.arg(0));
      case Op::Exp: return chain(e, e.arg(0));
      case Op::Log: {
        Expr da = (*this)(e.arg(0));
        return da.is_zero() ? Expr() : da / e.arg(0);
      }
      case Op::Sqrt: {
        Expr da = (*this)(e.arg(0));
        return da.is_zero() ? Expr() : da / (Expr(2.0) * e);
      }
      case Op::Abs: return chain(e.arg(0) / e, e.arg(0));
      case Op::Pow: {
        const Rational p = e.exponent();
        Expr da = (*this)(e.arg(0));
        if (da.is_zero()) return Expr();
        return Expr(p.value()) * pow(e.arg(0), p - Rational{1, 1}) * da;
      }
      case Op::Add: return (*this)(e.arg(0)) + (*this)(e.arg(1));
      case Op::Sub: return (*this)(e.arg(0)) - (*this)(e.arg(1));
      case Op::Mul: return (*this)(e.arg(0)) * e.arg(1) + e.arg(0) * (*this)(e.arg(1));
      case Op::Div: {
        Expr da = (*this)(e.arg(0));
        Expr db = (*this)(e.arg(1));
        return (da - e * db) / e.arg(1);
      }
    }
    return Expr();
  }

  Expr chain(const Expr& outer, const Expr& inner) {
    Expr d = (*this)(inner);
    return d.is_zero() ? Expr() : outer * d;
  }

  const Tangent& tangent_;
  DeriveCache* shared_;
  std::unordered_map<const Node*, Expr> memo_;
};

}  // namespace

const Expr* DeriveCache::find(const Expr& e) const {
  auto it = entries_.find(e.id());
  return it == entries_.end() ? nullptr : &it->second.second;
}

void DeriveCache::insert(const Expr& e, const Expr& result) { entries_.try_emplace(e.id(), e, result); }

Expr derive(const Expr& e, const Tangent& tangent) { return Deriver(tangent, nullptr)(e); }

Expr derive(const Expr& e, const Tangent& tangent, DeriveCache& cache) {
  return Deriver(tangent, &cache)(e);
}

Expr diff(const Expr& e, VarId v) {
  const Tangent t{[v](VarId id) { return id == v ? Expr(1.0) : Expr(); },
                  std::uint64_t{1} << (v % 64)};
  return derive(e, t);
}

Expr diff(const Expr& e, std::string_view v) { return diff(e, intern(v)); }

// ---------------------------------------------------------------------------
// Substitution and traversal

namespace {

class Substituter {
 public:
  explicit Substituter(const std::unordered_map<VarId, Expr>& r) : repl_(r) {
    for (const auto& [id, _] : r) support_ |= std::uint64_t{1} << (id % 64);
  }

  Expr operator()(const Expr& e) {
    if ((e.var_mask() & support_) == 0) return e;
    if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
    Expr s = compute(e);
    memo_.emplace(e.id(), s);
    return s;
  }

 private:
  Expr compute(const Expr& e) {
    switch (e.op()) {
      case Op::Const: return e;
      case Op::Var: {
        auto it = repl_.find(e.var());
        return it == repl_.end() ? e : it->second;
      }
      case Op::Neg: return -(*this)(e.arg(0));
      case Op::Sin: return sin((*this)(e.arg(0)));
      case Op::Cos: return cos((*this)(e.arg(0)));
      case Op::Exp: return exp((*this)(e.arg(0)));
      case Op::Log: return log((*this)(e.arg(0)));
      case Op::Sqrt: return sqrt((*this)(e.arg(0)));
      case Op::Abs: return abs((*this)(e.arg(0)));
      case Op::Pow: return pow((*this)(e.arg(0)), e.exponent());
      case Op::Add: return (*this)(e.arg(0)) + (*this)(e.arg(1));
      case Op::Sub: return (*this)(e.arg(0)) - (*this)(e.arg(1));
      case Op::Mul: return (*this)(e.arg(0)) * (*this)(e.arg(1));
      case Op::Div: return (*this)(e.arg(0)) / (*this)(e.arg(1));
    }
    return e;
  }

  const std::unordered_map<VarId, Expr>& repl_;
  std::uint64_t support_ = 0;
  std::unordered_map<const Node*, Expr> memo_;
};

}  // namespace

Expr substitute(const Expr& e, const std::unordered_map<VarId, Expr>& replacements) {
  return Substituter(replacements)(e);
}

std::vector<VarId> free_variables(const Expr& e) {
  std::vector<VarId> out;
  std::unordered_set<VarId> seen_vars;
  std::unordered_set<const Node*> seen;
  std::vector<const Expr*> stack{&e};
  while (!stack.empty()) {
    const Expr* cur = stack.back();
    stack.pop_back();
    if (cur->id() == nullptr || !seen.insert(cur->id()).second) continue;
    if (cur->op() == Op::Var) {
      if (seen_vars.insert(cur->var()).second) out.push_back(cur->var());
      continue;
    }
    if (cur->op() == Op::Const) continue;
    if (detail::is_binary(cur->op())) stack.push_back(&cur->arg(1));
    stack.push_back(&cur->arg(0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

double Env::get(std::string_view name) const {
  auto it = values_.find(std::string(name));
  if (it == values_.end()) throw EvalError("unbound variable '" + std::string(name) + "'");
  return it->second;
}

double eval(const Expr& e, const Env& env) {
  std::vector<VarId> vars = free_variables(e);
  std::vector<double> in;
  in.reserve(vars.size());
  for (VarId v : vars) in.push_back(env.get(var_name(v)));
  const Program program(std::span<const Expr>(&e, 1), std::move(vars));
  return program(in).front();
}

}  // namespace concircle
