#pragma once

#include <cstdint>

#include "concircle/expr.hpp"

namespace concircle {

struct Node {
  Op op = Op::Const;
  double value = 0.0;
  VarId var = 0;
  Rational exponent;
  Expr a{std::shared_ptr<const Node>{}};
  Expr b{std::shared_ptr<const Node>{}};
  std::uint64_t mask = 0;
  std::size_t hash = 0;

  Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;
};

namespace detail {

/// Returns the canonical shared node for the given structure.
Expr make_node(Op op, double value, VarId var, Rational exponent, const Expr& a, const Expr& b);

inline bool is_unary(Op op) {
  return op == Op::Neg || op == Op::Sin || op == Op::Cos || op == Op::Exp || op == Op::Log ||
         op == Op::Sqrt || op == Op::Abs || op == Op::Pow;
}
inline bool is_binary(Op op) {
  return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div;
}

const char* function_name(Op op);

}  // namespace detail
}  // namespace concircle
