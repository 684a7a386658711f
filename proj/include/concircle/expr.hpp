#pragma once

// Symbolic scalar expressions: parse, differentiate exactly, evaluate.
//
// Expressions are immutable DAGs of hash-consed nodes. Structurally equal
// subtrees built anywhere in the process share one node, which keeps repeated
// total derivatives from blowing up. Simplification is limited to constant
// folding, identity elements and x - x = 0 on shared nodes; equality of two
// expressions is decided downstream by numeric sampling.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace concircle {

class ExprError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ExprError {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class EvalError : public ExprError {
 public:
  using ExprError::ExprError;
};

/// Exact rational p/q with q > 0, always stored reduced.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t num, std::int64_t den = 1);
  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  bool is_integer() const noexcept { return den == 1; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

Rational operator-(Rational a, Rational b);

using VarId = std::uint32_t;

/// Interns a variable name; the same name always maps to the same id.
VarId intern(std::string_view name);
const std::string& var_name(VarId id);

enum class Op : std::uint8_t {
  Const,
  Var,
  Neg,
  Sin,
  Cos,
  Exp,
  Log,
  Sqrt,
  Abs,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
};

struct Node;

class Expr {
 public:
  /// The constant zero.
  Expr();
  Expr(double value);  // NOLINT(google-explicit-constructor)

  static Expr constant(double value);
  static Expr variable(std::string_view name);
  static Expr variable(VarId id);

  Op op() const noexcept;
  double constant_value() const;
  VarId var() const;
  Rational exponent() const;
  /// Operand 0 for unary ops and Pow, operands 0/1 for binary ops.
  const Expr& arg(int index) const;

  bool is_constant() const noexcept { return op() == Op::Const; }
  bool is_zero() const noexcept;
  bool is_one() const noexcept;

  /// 64-bit summary of the variables reachable from this node (bit = id % 64).
  /// A clear bit proves independence; a set bit proves nothing.
  std::uint64_t var_mask() const noexcept;
  bool may_depend_on(VarId id) const noexcept;

  /// Stable identity of the shared node; equal ids mean equal structure.
  const Node* id() const noexcept { return node_.get(); }
  std::size_t node_count() const;

  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr& operator+=(Expr& a, const Expr& b);
Expr& operator-=(Expr& a, const Expr& b);

Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sqrt(const Expr& a);
Expr abs(const Expr& a);
Expr pow(const Expr& base, Rational exponent);
Expr square(const Expr& a);

/// Grammar (whitespace-insensitive):
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := '-' factor | power
///   power  := base ('^' rational)?        -- right associative
///   base   := number | ident | ident '(' expr ')' | '(' expr ')'
/// Unary minus binds looser than '^', so "-x^2" is -(x^2).
Expr parse(std::string_view text);

/// Prints in the grammar accepted by parse(); constants use 17 significant digits.
std::string to_string(const Expr& e);

Expr diff(const Expr& e, VarId v);
Expr diff(const Expr& e, std::string_view v);

/// Derivation along a vector field: sum over v of tangent(v) * de/dv, computed
/// in one chain-rule pass. `support` is the var_mask of all v with a
/// non-zero tangent; tangent() is only consulted for variables in the tree.
struct Tangent {
  std::function<Expr(VarId)> component;
  std::uint64_t support = ~std::uint64_t{0};
};
Expr derive(const Expr& e, const Tangent& tangent);

/// Memo for repeated derive() calls with one tangent. Keeps its keys alive so
/// a freed node address can never alias a cached entry.
class DeriveCache {
 public:
  const Expr* find(const Expr& e) const;
  void insert(const Expr& e, const Expr& result);
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::unordered_map<const Node*, std::pair<Expr, Expr>> entries_;
};
Expr derive(const Expr& e, const Tangent& tangent, DeriveCache& cache);

Expr substitute(const Expr& e, const std::unordered_map<VarId, Expr>& replacements);

/// Variables in first-occurrence (depth-first, left to right) order.
std::vector<VarId> free_variables(const Expr& e);

class Env {
 public:
  Env() = default;
  Env(std::initializer_list<std::pair<const std::string, double>> values) : values_(values) {}

  void set(std::string_view name, double value) { values_[std::string(name)] = value; }
  double get(std::string_view name) const;
  bool contains(std::string_view name) const { return values_.count(std::string(name)) != 0; }

 private:
  std::unordered_map<std::string, double> values_;
};

/// Throws EvalError on an unbound variable or a domain violation.
double eval(const Expr& e, const Env& env);

}  // namespace concircle
