#pragma once

// Straight-line evaluation program compiled from a set of expressions.
//
// Compilation flattens the shared DAG into a tape with value numbering, so
// every distinct subexpression is evaluated once per point no matter how many
// roots reference it. A Program is immutable and may be run from many
// threads at once, each with its own workspace.

#include <span>
#include <vector>

#include "concircle/expr.hpp"

namespace concircle {

class Program {
 public:
  Program() = default;
  Program(std::span<const Expr> roots, std::vector<VarId> inputs);

  std::size_t input_count() const noexcept { return inputs_.size(); }
  std::size_t output_count() const noexcept { return outputs_.size(); }
  std::size_t size() const noexcept { return tape_.size(); }
  std::size_t workspace_size() const noexcept { return tape_.size(); }
  const std::vector<VarId>& inputs() const noexcept { return inputs_; }

  /// Throws EvalError on a domain violation.
  void run(std::span<const double> in, std::span<double> out, std::span<double> workspace) const;

  /// Also returns, per output, the magnitude the value would have had without
  /// cancellation (sums of absolute terms, propagated to first order through
  /// nonlinear functions). Zero tests compare |value| against this scale.
  void run_with_scale(std::span<const double> in, std::span<double> out, std::span<double> scale,
                      std::span<double> workspace, std::span<double> scale_workspace) const;

  /// Convenience wrapper that allocates its own workspace.
  std::vector<double> operator()(std::span<const double> in) const;

 private:
  struct Instr {
    Op op;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double c = 0.0;  // constant value, or exponent for Pow
    Rational p;
  };

  std::vector<Instr> tape_;
  std::vector<std::uint32_t> outputs_;
  std::vector<VarId> inputs_;
};

}  // namespace concircle
