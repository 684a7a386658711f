#include "concircle/jet.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "concircle/program.hpp"
#include "concircle/sweep.hpp"

namespace concircle {

namespace {

std::string jet_name(int index, int order) {
  return "x" + std::to_string(index) + "_" + std::to_string(order);
}

std::uint64_t mask_of(VarId v) { return std::uint64_t{1} << (v % 64); }

double falling_factorial(int k, int r) {
  double f = 1.0;
  for (int j = 0; j < r; ++j) f *= k - j;
  return f;
}

Expr scaled(const Expr& c, double factor) { return factor == 1.0 ? c : Expr(factor) * c; }

}  // namespace

// ---------------------------------------------------------------------------
// JetSpace

JetSpace::JetSpace(int max_order) : max_order_(max_order) {
  if (max_order < kMinJetOrder)
    throw std::invalid_argument("jet order must be at least " + std::to_string(kMinJetOrder));
  for (int k = 0; k <= max_order; ++k)
    for (int i = 0; i < kJetDimension; ++i) variables_.push_back(intern(jet_name(i, k)));

  std::unordered_map<VarId, Expr> next;
  std::uint64_t support = 0;
  for (int k = 0; k <= max_order; ++k) {
    for (int i = 0; i < kJetDimension; ++i) {
      const VarId v = var(i, k);
      support |= mask_of(v);
      if (k < max_order) next.emplace(v, Expr::variable(var(i, k + 1)));
    }
  }
  const int top = max_order;
  total_.support = support;
  total_.component = [next = std::move(next), vars = variables_, top](VarId v) -> Expr {
    if (auto it = next.find(v); it != next.end()) return it->second;
    for (int i = 0; i < kJetDimension; ++i)
      if (vars[static_cast<std::size_t>(top * kJetDimension + i)] == v)
        throw OrderOverflow("total derivative needs jet order " + std::to_string(top + 1) + " but K = " +
                            std::to_string(top));
    return Expr();
  };
}

VarId JetSpace::var(int index, int order) const { return variables_.at(slot(index, order)); }

std::size_t JetSpace::slot(int index, int order) const {
  if (index < 0 || index >= kJetDimension || order < 0 || order > max_order_)
    throw std::out_of_range("jet variable " + jet_name(index, order) + " outside the jet space");
  return static_cast<std::size_t>(order * kJetDimension + index);
}

bool JetSpace::locate(VarId v, JetVar& out) const {
  auto it = std::find(variables_.begin(), variables_.end(), v);
  if (it == variables_.end()) return false;
  const auto s = static_cast<int>(it - variables_.begin());
  out = {s % kJetDimension, s / kJetDimension};
  return true;
}

int JetSpace::order_of(const Expr& e) const {
  int order = -1;
  JetVar jv;
  for (VarId v : free_variables(e))
    if (locate(v, jv)) order = std::max(order, jv.order);
  return order;
}

Expr JetSpace::total_derivative(const Expr& e) const { return derive(e, total_); }

Expr JetSpace::total_derivative(const Expr& e, DeriveCache& cache) const { return derive(e, total_, cache); }

Expr JetSpace::lift_base(const Expr& e) const {
  const std::unordered_map<VarId, Expr> lift{{intern("x0"), symbol(0, 0)}, {intern("x1"), symbol(1, 0)}};
  return substitute(e, lift);
}

// ---------------------------------------------------------------------------
// JetPoint

JetPoint::JetPoint(const JetSpace& space) : values_(space.size(), 0.0) {}

JetPoint::JetPoint(const JetSpace& space, std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() != space.size()) throw std::invalid_argument("jet point has the wrong number of entries");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("jet point entries must be finite");
}

std::vector<JetPoint> sample_jets(const JetSpace& space, std::size_t count, std::uint64_t seed) {
  SampleRng rng(seed);
  std::vector<JetPoint> points;
  points.reserve(count);
  for (std::size_t p = 0; p < count; ++p) {
    std::vector<double> values(space.size());
    for (double& v : values) v = rng.component();
    points.emplace_back(space, std::move(values));
  }
  return points;
}

// ---------------------------------------------------------------------------
// Forms

Form1::Form1(int max_order)
    : max_order_(max_order), coeffs_(static_cast<std::size_t>((max_order + 1) * kJetDimension)) {}

void Form1::add(int index, int order, const Expr& c) {
  if (order > max_order_) throw OrderOverflow("1-form component beyond jet order");
  Expr& slot = coeffs_[order * kJetDimension + index];
  slot = slot + c;
}

int Form1::top_order() const {
  for (std::size_t s = coeffs_.size(); s-- > 0;)
    if (!coeffs_[s].is_zero()) return static_cast<int>(s) / kJetDimension;
  return -1;
}

Form2::Form2(int max_order)
    : max_order_(max_order),
      slots_(static_cast<std::size_t>((max_order + 1) * kJetDimension)),
      coeffs_(slots_ * (slots_ - 1) / 2) {}

std::size_t Form2::pair_index(std::size_t a, std::size_t b) const {
  // a < b; rows of the strict upper triangle laid out one after another.
  return a * slots_ - a * (a + 1) / 2 + (b - a - 1);
}

Expr Form2::coeff(int index_a, int order_a, int index_b, int order_b) const {
  const auto a = static_cast<std::size_t>(order_a * kJetDimension + index_a);
  const auto b = static_cast<std::size_t>(order_b * kJetDimension + index_b);
  if (a == b) return Expr();
  return a < b ? coeffs_[pair_index(a, b)] : -coeffs_[pair_index(b, a)];
}

void Form2::add(int index_a, int order_a, int index_b, int order_b, const Expr& c) {
  if (order_a > max_order_ || order_b > max_order_) throw OrderOverflow("2-form component beyond jet order");
  const auto a = static_cast<std::size_t>(order_a * kJetDimension + index_a);
  const auto b = static_cast<std::size_t>(order_b * kJetDimension + index_b);
  if (a == b || c.is_zero()) return;
  if (a < b) {
    coeffs_[pair_index(a, b)] += c;
  } else {
    coeffs_[pair_index(b, a)] -= c;
  }
}

int Form2::top_order() const {
  int top = -1;
  for (const Entry& e : entries()) top = std::max({top, e.a.order, e.b.order});
  return top;
}

std::vector<Form2::Entry> Form2::entries() const {
  std::vector<Entry> out;
  for (std::size_t a = 0; a < slots_; ++a) {
    for (std::size_t b = a + 1; b < slots_; ++b) {
      const Expr& c = coeffs_[pair_index(a, b)];
      if (c.is_zero()) continue;
      out.push_back({{static_cast<int>(a) % kJetDimension, static_cast<int>(a) / kJetDimension},
                     {static_cast<int>(b) % kJetDimension, static_cast<int>(b) / kJetDimension},
                     c});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operators

Form1 exterior_d(const JetSpace& space, const Expr& f) {
  Form1 out(space);
  JetVar jv;
  for (VarId v : free_variables(f))
    if (space.locate(v, jv)) out.add(jv.index, jv.order, diff(f, v));
  return out;
}

Form2 exterior_d1(const JetSpace& space, const Form1& omega) {
  Form2 out(space);
  JetVar jv;
  for (int k = 0; k <= omega.max_order(); ++k) {
    for (int i = 0; i < kJetDimension; ++i) {
      const Expr& c = omega.coeff(i, k);
      if (c.is_zero()) continue;
      for (VarId v : free_variables(c))
        if (space.locate(v, jv)) out.add(jv.index, jv.order, i, k, diff(c, v));
    }
  }
  return out;
}

namespace {

void check_shift(int order, int max_order) {
  if (order + 1 > max_order)
    throw OrderOverflow("total derivative of dx_" + std::to_string(order) + " needs jet order " +
                        std::to_string(order + 1) + " but K = " + std::to_string(max_order));
}

Form1 total_derivative_cached(const JetSpace& space, const Form1& omega, DeriveCache& cache) {
  Form1 out(space);
  for (int k = 0; k <= omega.max_order(); ++k) {
    for (int i = 0; i < kJetDimension; ++i) {
      const Expr& c = omega.coeff(i, k);
      if (c.is_zero()) continue;
      check_shift(k, space.max_order());
      out.add(i, k, space.total_derivative(c, cache));
      out.add(i, k + 1, c);
    }
  }
  return out;
}

Form2 total_derivative_cached(const JetSpace& space, const Form2& omega, DeriveCache& cache) {
  Form2 out(space);
  for (const Form2::Entry& e : omega.entries()) {
    check_shift(std::max(e.a.order, e.b.order), space.max_order());
    out.add(e.a.index, e.a.order, e.b.index, e.b.order, space.total_derivative(e.coeff, cache));
    out.add(e.a.index, e.a.order + 1, e.b.index, e.b.order, e.coeff);
    out.add(e.a.index, e.a.order, e.b.index, e.b.order + 1, e.coeff);
  }
  return out;
}

void accumulate(Form1& out, const Form1& term, double factor) {
  for (int k = 0; k <= term.max_order(); ++k)
    for (int i = 0; i < kJetDimension; ++i)
      if (!term.coeff(i, k).is_zero()) out.add(i, k, scaled(term.coeff(i, k), factor));
}

void accumulate(Form2& out, const Form2& term, double factor) {
  for (const Form2::Entry& e : term.entries())
    out.add(e.a.index, e.a.order, e.b.index, e.b.order, scaled(e.coeff, factor));
}

// One cache serves every d_T in the series: i_r only rescales coefficients,
// so d_T of the same coefficient recurs across r.
template <class Form>
Form delta_series(const JetSpace& space, const Form& d_omega) {
  Form out(space);
  DeriveCache cache;
  const int top = d_omega.top_order();
  double weight = 1.0;
  for (int r = 0; r <= top; ++r) {
    if (r > 0) weight /= -r;
    Form term = iota(r, d_omega);
    for (int s = 0; s < r; ++s) term = total_derivative_cached(space, term, cache);
    accumulate(out, term, weight);
  }
  return out;
}

}  // namespace

Form1 total_derivative(const JetSpace& space, const Form1& omega) {
  DeriveCache cache;
  return total_derivative_cached(space, omega, cache);
}

Form2 total_derivative(const JetSpace& space, const Form2& omega) {
  DeriveCache cache;
  return total_derivative_cached(space, omega, cache);
}

Form1 iota(int r, const Form1& omega) {
  if (r < 0) throw std::invalid_argument("insertion order must be non-negative");
  Form1 out(omega.max_order());
  for (int k = r; k <= omega.max_order(); ++k)
    for (int i = 0; i < kJetDimension; ++i)
      if (!omega.coeff(i, k).is_zero()) out.add(i, k - r, scaled(omega.coeff(i, k), falling_factorial(k, r)));
  return out;
}

Form2 iota(int r, const Form2& omega) {
  if (r < 0) throw std::invalid_argument("insertion order must be non-negative");
  Form2 out(omega.max_order());
  for (const Form2::Entry& e : omega.entries()) {
    if (e.a.order >= r)
      out.add(e.a.index, e.a.order - r, e.b.index, e.b.order, scaled(e.coeff, falling_factorial(e.a.order, r)));
    if (e.b.order >= r)
      out.add(e.a.index, e.a.order, e.b.index, e.b.order - r, scaled(e.coeff, falling_factorial(e.b.order, r)));
  }
  return out;
}

Form1 lagrange_derivative(const JetSpace& space, const Expr& f) {
  return delta_series(space, exterior_d(space, f));
}

Form2 lagrange_derivative1(const JetSpace& space, const Form1& omega) {
  return delta_series(space, exterior_d1(space, omega));
}

// ---------------------------------------------------------------------------
// Fundamental fields

namespace {

void require_second_order(const JetSpace& space, const Expr& f) {
  if (space.order_of(f) > 2) throw std::invalid_argument("fundamental fields act on functions of jet order <= 2");
}

}  // namespace

Expr zeta1(const JetSpace& space, const Expr& f) {
  require_second_order(space, f);
  Expr out;
  for (int i = 0; i < kJetDimension; ++i) {
    out += space.symbol(i, 1) * diff(f, space.var(i, 1));
    out += Expr(2.0) * space.symbol(i, 2) * diff(f, space.var(i, 2));
  }
  return out;
}

Expr zeta2(const JetSpace& space, const Expr& f) {
  require_second_order(space, f);
  Expr out;
  for (int i = 0; i < kJetDimension; ++i) out += space.symbol(i, 1) * diff(f, space.var(i, 2));
  return out;
}

// ---------------------------------------------------------------------------
// Residual evaluation

namespace {

std::string basis_label(int index, int order) { return "d" + jet_name(index, order); }

}  // namespace

std::vector<LabelledExpr> components(const Form1& omega) {
  std::vector<LabelledExpr> out;
  for (int k = 0; k <= omega.max_order(); ++k)
    for (int i = 0; i < kJetDimension; ++i)
      if (!omega.coeff(i, k).is_zero()) out.push_back({basis_label(i, k), omega.coeff(i, k)});
  return out;
}

std::vector<LabelledExpr> components(const Form2& omega) {
  std::vector<LabelledExpr> out;
  for (const Form2::Entry& e : omega.entries())
    out.push_back({basis_label(e.a.index, e.a.order) + "^" + basis_label(e.b.index, e.b.order), e.coeff});
  return out;
}

bool ResidualReport::passed() const {
  return std::all_of(rows.begin(), rows.end(),
                     [this](const ResidualRow& r) { return tolerance.accepts(r.value, r.scale); });
}

double ResidualReport::max_abs() const {
  double m = 0.0;
  for (const ResidualRow& r : rows) m = std::max(m, std::fabs(r.value));
  return m;
}

const ResidualRow* ResidualReport::worst() const {
  const ResidualRow* w = nullptr;
  for (const ResidualRow& r : rows)
    if (w == nullptr || tolerance.ratio(r.value, r.scale) > tolerance.ratio(w->value, w->scale)) w = &r;
  return w;
}

void ResidualReport::write_csv(std::ostream& out) const {
  out << "point,label,value\n";
  std::ostringstream line;
  line.precision(17);
  for (const ResidualRow& r : rows) {
    line.str("");
    line << r.point << ',' << r.label << ',' << r.value << '\n';
    out << line.str();
  }
}

ResidualReport evaluate_residuals(const JetSpace& space, std::span<const LabelledExpr> residuals,
                                  std::span<const JetPoint> points, Tolerance tolerance, bool parallel) {
  ResidualReport report;
  report.tolerance = tolerance;
  if (residuals.empty() || points.empty()) return report;
  std::vector<Expr> roots;
  roots.reserve(residuals.size());
  for (const LabelledExpr& r : residuals) roots.push_back(r.expr);
  const Program program(roots, space.variables());
  std::vector<double> inputs;
  inputs.reserve(points.size() * space.size());
  for (const JetPoint& p : points) inputs.insert(inputs.end(), p.values().begin(), p.values().end());
  const SweepResult sweep = parallel ? sweep_parallel(program, inputs) : sweep_serial(program, inputs);
  report.rows.reserve(points.size() * residuals.size());
  for (std::size_t p = 0; p < sweep.points; ++p)
    for (std::size_t j = 0; j < residuals.size(); ++j)
      report.rows.push_back({p, residuals[j].label, sweep.value(p, j), sweep.scale(p, j)});
  return report;
}

VariationalityResult variationality_check(const JetSpace& space, const Form1& source,
                                          std::span<const JetPoint> samples, Tolerance tolerance) {
  if (!source.is_semibasic()) throw std::invalid_argument("variationality check needs a source form (dx_0 only)");
  const std::vector<LabelledExpr> parts = components(lagrange_derivative1(space, source));
  VariationalityResult result;
  result.report = evaluate_residuals(space, parts, samples, tolerance);
  result.passed = result.report.passed();
  result.max_residual = result.report.max_abs();
  return result;
}

ResidualPair zermelo_check(const JetSpace& space, const Expr& lagrangian, std::span<const JetPoint> samples,
                           Tolerance tolerance) {
  const LabelledExpr first[] = {{"zeta1 L - L", zeta1(space, lagrangian) - lagrangian}};
  const LabelledExpr second[] = {{"zeta2 L", zeta2(space, lagrangian)}};
  return {evaluate_residuals(space, first, samples, tolerance), evaluate_residuals(space, second, samples, tolerance)};
}

ResidualPair param_independence_check(const JetSpace& space, const Expr& f, std::span<const JetPoint> samples,
                                      Tolerance tolerance) {
  const LabelledExpr first[] = {{"zeta1 f", zeta1(space, f)}};
  const LabelledExpr second[] = {{"zeta2 f", zeta2(space, f)}};
  return {evaluate_residuals(space, first, samples, tolerance), evaluate_residuals(space, second, samples, tolerance)};
}

}  // namespace concircle
