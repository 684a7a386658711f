#pragma once

// Calculus on the jet space of curves in a 2-manifold.
//
// Jet variables are named "x{i}_{k}": index i in {0, 1}, order k in 0..K.
// x{i}_0 is the position, x{i}_1 the velocity u, x{i}_2 the acceleration and
// so on. Forms are stored over the basis dx{i}_{k}.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "concircle/expr.hpp"
#include "concircle/program.hpp"
#include "concircle/sampling.hpp"

namespace concircle {

class OrderOverflow : public ExprError {
 public:
  using ExprError::ExprError;
};

inline constexpr int kJetDimension = 2;
inline constexpr int kMinJetOrder = 7;

struct JetVar {
  int index = 0;
  int order = 0;
};

class JetSpace {
 public:
  explicit JetSpace(int max_order = kMinJetOrder);

  int max_order() const noexcept { return max_order_; }
  /// Number of scalar coordinates, 2 * (K + 1).
  std::size_t size() const noexcept { return variables_.size(); }
  /// Coordinates in slot order: slot = order * 2 + index.
  const std::vector<VarId>& variables() const noexcept { return variables_; }

  VarId var(int index, int order) const;
  Expr symbol(int index, int order) const { return Expr::variable(var(index, order)); }
  std::size_t slot(int index, int order) const;
  /// False for variables outside this jet space.
  bool locate(VarId v, JetVar& out) const;
  /// Highest jet order e depends on, -1 if it depends on none.
  int order_of(const Expr& e) const;

  /// d_T: replaces each dependence on x{i}_{k} by the chain-rule term with
  /// x{i}_{k+1}. Throws OrderOverflow if e reaches order K.
  Expr total_derivative(const Expr& e) const;
  Expr total_derivative(const Expr& e, DeriveCache& cache) const;

  /// Renames the base coordinates x0, x1 to x0_0, x1_0.
  Expr lift_base(const Expr& e) const;

 private:
  int max_order_;
  std::vector<VarId> variables_;
  Tangent total_;
};

/// Numeric values of all jet coordinates of one point.
class JetPoint {
 public:
  /// All zero.
  explicit JetPoint(const JetSpace& space);
  JetPoint(const JetSpace& space, std::vector<double> values);

  double operator()(int index, int order) const { return values_[order * kJetDimension + index]; }
  double& operator()(int index, int order) { return values_[order * kJetDimension + index]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

/// A list of jet expressions compiled once and evaluated at points.
class JetMap {
 public:
  JetMap(const JetSpace& space, std::span<const Expr> exprs) : program_(exprs, space.variables()) {}

  std::size_t size() const noexcept { return program_.output_count(); }
  std::vector<double> operator()(const JetPoint& p) const { return program_(p.values()); }

 private:
  Program program_;
};

/// Each component drawn independently by SampleRng::component().
std::vector<JetPoint> sample_jets(const JetSpace& space, std::size_t count, std::uint64_t seed = kDefaultSeed);

class Form1 {
 public:
  explicit Form1(const JetSpace& space) : Form1(space.max_order()) {}
  explicit Form1(int max_order);

  int max_order() const noexcept { return max_order_; }
  const Expr& coeff(int index, int order) const { return coeffs_[order * kJetDimension + index]; }
  void set(int index, int order, Expr c) { coeffs_[order * kJetDimension + index] = std::move(c); }
  void add(int index, int order, const Expr& c);

  /// Highest order with a structurally non-zero coefficient, -1 for the zero form.
  int top_order() const;
  /// Only dx{i}_0 components, i.e. a source form.
  bool is_semibasic() const { return top_order() <= 0; }

 private:
  int max_order_;
  std::vector<Expr> coeffs_;
};

/// Antisymmetric by construction: only slot a < slot b is stored and
/// coeff(b, a) returns -coeff(a, b).
class Form2 {
 public:
  explicit Form2(const JetSpace& space) : Form2(space.max_order()) {}
  explicit Form2(int max_order);

  int max_order() const noexcept { return max_order_; }
  Expr coeff(int index_a, int order_a, int index_b, int order_b) const;
  /// Adds c * dx_a ^ dx_b; a == b contributes nothing.
  void add(int index_a, int order_a, int index_b, int order_b, const Expr& c);
  int top_order() const;

  struct Entry {
    JetVar a;
    JetVar b;
    Expr coeff;
  };
  /// Structurally non-zero entries with slot(a) < slot(b).
  std::vector<Entry> entries() const;

 private:
  std::size_t pair_index(std::size_t a, std::size_t b) const;

  int max_order_;
  std::size_t slots_;
  std::vector<Expr> coeffs_;
};

Form1 exterior_d(const JetSpace& space, const Expr& f);
Form2 exterior_d1(const JetSpace& space, const Form1& omega);

/// Lie derivative along the total derivative: d_T(c dx_k) = d_T(c) dx_k + c dx_{k+1}.
Form1 total_derivative(const JetSpace& space, const Form1& omega);
Form2 total_derivative(const JetSpace& space, const Form2& omega);

/// i_r(dx_k) = k!/(k-r)! dx_{k-r}, zero when r > k; a derivation over wedge slots.
Form1 iota(int r, const Form1& omega);
Form2 iota(int r, const Form2& omega);

/// delta = sum_r (-1)^r / r! d_T^r i_r d, truncated where i_r vanishes.
Form1 lagrange_derivative(const JetSpace& space, const Expr& f);
Form2 lagrange_derivative1(const JetSpace& space, const Form1& omega);

/// zeta1 = u d/du + 2 a d/da and zeta2 = u d/da on functions of order <= 2,
/// where a = x_2. Throws std::invalid_argument on higher order input.
Expr zeta1(const JetSpace& space, const Expr& f);
Expr zeta2(const JetSpace& space, const Expr& f);

struct LabelledExpr {
  std::string label;
  Expr expr;
};

/// Non-zero coefficients labelled "dx{i}_{k}" or "dx{i}_{k}^dx{j}_{m}".
std::vector<LabelledExpr> components(const Form1& omega);
std::vector<LabelledExpr> components(const Form2& omega);

struct ResidualRow {
  std::size_t point = 0;
  std::string label;
  double value = 0.0;
  double scale = 0.0;
};

struct ResidualReport {
  std::vector<ResidualRow> rows;
  Tolerance tolerance;

  bool passed() const;
  double max_abs() const;
  /// Row with the largest tolerance ratio; null for an empty report.
  const ResidualRow* worst() const;
  /// CSV columns: point, label, value.
  void write_csv(std::ostream& out) const;
};

ResidualReport evaluate_residuals(const JetSpace& space, std::span<const LabelledExpr> residuals,
                                  std::span<const JetPoint> points, Tolerance tolerance = {},
                                  bool parallel = true);

struct VariationalityResult {
  bool passed = false;
  double max_residual = 0.0;
  ResidualReport report;
};

/// Evaluates delta(E) at the samples. E must be a source form.
VariationalityResult variationality_check(const JetSpace& space, const Form1& source,
                                          std::span<const JetPoint> samples, Tolerance tolerance = {});

struct ResidualPair {
  ResidualReport first;
  ResidualReport second;
  bool passed() const { return first.passed() && second.passed(); }
};

/// (zeta1 L - L, zeta2 L).
ResidualPair zermelo_check(const JetSpace& space, const Expr& lagrangian, std::span<const JetPoint> samples,
                           Tolerance tolerance = {});
/// (zeta1 f, zeta2 f).
ResidualPair param_independence_check(const JetSpace& space, const Expr& f, std::span<const JetPoint> samples,
                                      Tolerance tolerance = {});

}  // namespace concircle
