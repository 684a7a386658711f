#include "concircle/mechanics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace concircle {

namespace {

Expr metric_dot(const Metric& metric, char a, char b) {
  Expr s;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s += metric.g(i, j) * covariant_symbol(a, i) * covariant_symbol(b, j);
  return s;
}

// sqrt|g(u,u)|, with the absolute value only where the metric is indefinite.
Expr speed(const Metric& metric) {
  const Expr q = metric_dot(metric, 'u', 'u');
  return metric.signature() == Signature::riemannian ? sqrt(q) : sqrt(abs(q));
}

Expr area_factor(const Metric& metric) {
  const Expr root = metric.signature() == Signature::riemannian ? sqrt(metric.det()) : sqrt(abs(metric.det()));
  return metric.orientation() == 1 ? root : -root;
}

}  // namespace

Expr covariant_symbol(char kind, int index) {
  if ((kind != 'x' && kind != 'u' && kind != 'w') || index < 0 || index > 1)
    throw std::invalid_argument("covariant symbols are x0, x1, u0, u1, w0, w1");
  return Expr::variable(std::string(1, kind) + std::to_string(index));
}

Lagrangian::Lagrangian(std::string name, Expr covariant, double m)
    : name_(std::move(name)), expr_(std::move(covariant)), m_(m) {
  if (!std::isfinite(m)) throw std::invalid_argument("m must be finite");
}

Lagrangian Lagrangian::kinetic(const Metric& metric) {
  return {"kinetic", Expr(0.5) * metric_dot(metric, 'u', 'u')};
}

Lagrangian Lagrangian::norm(const Metric& metric, double m) {
  if (m < 0.0) throw std::invalid_argument("m must be non-negative");
  return {"norm", Expr(-m) * speed(metric), m};
}

Lagrangian Lagrangian::curvature(const Metric& metric) {
  const Expr cross = covariant_symbol('u', 0) * covariant_symbol('w', 1) - covariant_symbol('u', 1) * covariant_symbol('w', 0);
  const Expr q = metric_dot(metric, 'u', 'u');
  const Expr n3 = metric.signature() == Signature::riemannian ? pow(q, Rational::make(3, 2))
                                                               : pow(abs(q), Rational::make(3, 2));
  return {"curvature", area_factor(metric) * cross / n3};
}

Lagrangian Lagrangian::geodesic_circle(const Metric& metric, double m) {
  if (m < 0.0) throw std::invalid_argument("m must be non-negative");
  return {"geodesic-circle", curvature(metric).expr() - Expr(m) * speed(metric), m};
}

Expr to_jet(const JetGeometry& geo, const Expr& covariant) {
  std::unordered_map<VarId, Expr> repl;
  for (int i = 0; i < 2; ++i) {
    repl.emplace(covariant_symbol('x', i).var(), geo.space().symbol(i, 0));
    repl.emplace(covariant_symbol('u', i).var(), geo.space().symbol(i, 1));
    repl.emplace(covariant_symbol('w', i).var(), geo.w(i));
  }
  return substitute(covariant, repl);
}

// ---------------------------------------------------------------------------
// Momenta

SymbolicMomenta momenta_flat(const JetSpace& space, const Expr& jet_lagrangian) {
  SymbolicMomenta out;
  for (int i = 0; i < 2; ++i) {
    out.p1[i] = diff(jet_lagrangian, space.var(i, 2));
    out.p[i] = diff(jet_lagrangian, space.var(i, 1)) - space.total_derivative(out.p1[i]);
  }
  return out;
}

SymbolicMomenta momenta_covariant(const Lagrangian& lagrangian, const JetGeometry& geo) {
  SymbolicMomenta out;
  for (int i = 0; i < 2; ++i) out.p1[i] = to_jet(geo, diff(lagrangian.expr(), covariant_symbol('w', i).var()));
  const std::array<Expr, 2> p1_prime = geo.covariant_prime_covector(out.p1);
  for (int i = 0; i < 2; ++i)
    out.p[i] = to_jet(geo, diff(lagrangian.expr(), covariant_symbol('u', i).var())) - p1_prime[i];
  return out;
}

Momenta evaluate(const JetSpace& space, const SymbolicMomenta& momenta, const JetPoint& point, Frame frame) {
  const Expr all[] = {momenta.p1[0], momenta.p1[1], momenta.p[0], momenta.p[1]};
  const std::vector<double> v = JetMap(space, all)(point);
  return {{{v[0], v[1]}}, {{v[2], v[3]}}, frame};
}

namespace {

// i_1 dL - 1/2 d_T i_2 dL
Form1 momenta_relation_rhs(const JetSpace& space, const Expr& jet_lagrangian) {
  const Form1 dl = exterior_d(space, jet_lagrangian);
  Form1 rhs = iota(1, dl);
  const Form1 second = total_derivative(space, iota(2, dl));
  for (int k = 0; k <= second.max_order(); ++k)
    for (int i = 0; i < 2; ++i)
      if (!second.coeff(i, k).is_zero()) rhs.add(i, k, Expr(-0.5) * second.coeff(i, k));
  return rhs;
}

std::vector<LabelledExpr> difference(const std::string& prefix, const Form1& lhs, const Form1& rhs) {
  Form1 r = lhs;
  for (int k = 0; k <= rhs.max_order(); ++k)
    for (int i = 0; i < 2; ++i)
      if (!rhs.coeff(i, k).is_zero()) r.add(i, k, -rhs.coeff(i, k));
  std::vector<LabelledExpr> out;
  for (LabelledExpr& c : components(r)) out.push_back({prefix + " " + c.label, std::move(c.expr)});
  return out;
}

}  // namespace

std::vector<LabelledExpr> momenta_relation_flat(const JetSpace& space, const Expr& jet_lagrangian) {
  const SymbolicMomenta mom = momenta_flat(space, jet_lagrangian);
  Form1 lhs(space);
  for (int i = 0; i < 2; ++i) {
    lhs.add(i, 1, mom.p1[i]);
    lhs.add(i, 0, mom.p[i]);
  }
  return difference("flat momenta relation", lhs, momenta_relation_rhs(space, jet_lagrangian));
}

std::vector<LabelledExpr> momenta_relation_covariant(const Lagrangian& lagrangian, const JetGeometry& geo) {
  const SymbolicMomenta mom = momenta_covariant(lagrangian, geo);
  Form1 lhs(geo.space());
  for (int i = 0; i < 2; ++i) {
    // pi1_i (Du)^i = pi1_i (du^i + Gamma^i_{lj} u^j dx^l)
    lhs.add(i, 1, mom.p1[i]);
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j) lhs.add(l, 0, mom.p1[i] * geo.christoffel(i, l, j) * geo.u(j));
    lhs.add(i, 0, mom.p[i]);
  }
  return difference("covariant momenta relation", lhs, momenta_relation_rhs(geo.space(), to_jet(geo, lagrangian.expr())));
}

// ---------------------------------------------------------------------------
// Hamilton function

HamiltonForms hamilton(const JetSpace& space, const Expr& jet_lagrangian) {
  const SymbolicMomenta mom = momenta_flat(space, jet_lagrangian);
  Expr by_momenta = -jet_lagrangian;
  for (int i = 0; i < 2; ++i) by_momenta += mom.p1[i] * space.symbol(i, 2) + mom.p[i] * space.symbol(i, 1);
  const Expr by_fields =
      zeta1(space, jet_lagrangian) - space.total_derivative(zeta2(space, jet_lagrangian)) - jet_lagrangian;
  return {by_momenta, by_fields};
}

namespace {

Program compile_hamilton(const JetSpace& space, const HamiltonForms& h) {
  const Expr both[] = {h.by_momenta, h.by_fields};
  return Program(both, space.variables());
}

}  // namespace

HamiltonFunction::HamiltonFunction(const JetSpace& space, const HamiltonForms& h)
    : program_(compile_hamilton(space, h)) {}

double HamiltonFunction::operator()(const JetPoint& point) const {
  std::vector<double> work(program_.workspace_size());
  std::vector<double> work_scale(program_.workspace_size());
  double v[2];
  double scale[2];
  program_.run_with_scale(point.values(), v, scale, work, work_scale);
  const double bound = 1e-10 * std::max({1.0, scale[0], scale[1]});
  if (!(std::fabs(v[0] - v[1]) <= bound))
    throw std::logic_error("Hamilton function: momenta and fundamental-field forms disagree (" +
                           std::to_string(v[0]) + " vs " + std::to_string(v[1]) + ")");
  return v[0];
}

double hamilton_value(const JetSpace& space, const HamiltonForms& h, const JetPoint& point) {
  return HamiltonFunction(space, h)(point);
}

// ---------------------------------------------------------------------------
// Euler-Poisson equation

std::array<Expr, 2> euler_poisson_covariant(const Lagrangian& lagrangian, const JetGeometry& geo) {
  const SymbolicMomenta mom = momenta_covariant(lagrangian, geo);
  const std::array<Expr, 2> p_prime = geo.covariant_prime_covector(mom.p);
  std::array<Expr, 2> dl_du;
  for (int i = 0; i < 2; ++i) dl_du[i] = to_jet(geo, diff(lagrangian.expr(), covariant_symbol('u', i).var()));
  std::array<Expr, 2> out;
  for (int l = 0; l < 2; ++l) {
    Expr lhs = p_prime[l];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int q = 0; q < 2; ++q) lhs += mom.p1[i] * geo.riemann(l, j, q, i) * geo.u(j) * geo.u(q);
    Expr rhs = to_jet(geo, diff(lagrangian.expr(), covariant_symbol('x', l).var()));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        rhs -= dl_du[i] * geo.christoffel(i, l, j) * geo.u(j);
        rhs -= mom.p1[i] * geo.christoffel(i, l, j) * geo.w(j);
      }
    out[l] = lhs - rhs;
  }
  return out;
}

std::array<Expr, 2> curvature_cancellation(const JetGeometry& geo) {
  const Expr k = Lagrangian::curvature(geo.metric()).expr();
  std::array<Expr, 2> out;
  for (int l = 0; l < 2; ++l) {
    Expr r = to_jet(geo, diff(k, covariant_symbol('x', l).var()));
    for (int i = 0; i < 2; ++i) {
      const Expr dk_du = to_jet(geo, diff(k, covariant_symbol('u', i).var()));
      const Expr dk_dw = to_jet(geo, diff(k, covariant_symbol('w', i).var()));
      for (int j = 0; j < 2; ++j) {
        r -= dk_du * geo.christoffel(i, l, j) * geo.u(j);
        r -= dk_dw * geo.christoffel(i, l, j) * geo.w(j);
      }
    }
    out[l] = r;
  }
  return out;
}

Form1 geodesic_circle_source_form(const JetSpace& space, double m) {
  if (m < 0.0) throw std::invalid_argument("m must be non-negative");
  auto u = [&](int i) { return space.symbol(i, 1); };
  auto a = [&](int i) { return space.symbol(i, 2); };
  auto da = [&](int i) { return space.symbol(i, 3); };
  const Expr uu = u(0) * u(0) + u(1) * u(1);
  const Expr au = a(0) * u(0) + a(1) * u(1);
  const Expr n3 = pow(uu, Rational::make(3, 2));
  const Expr n5 = pow(uu, Rational::make(5, 2));
  // e_{ij} v^j with e_{01} = 1: (v^1, -v^0).
  const std::array<Expr, 2> e_da{da(1), -da(0)};
  const std::array<Expr, 2> e_a{a(1), -a(0)};
  Form1 out(space);
  for (int i = 0; i < 2; ++i)
    out.set(i, 0,
            e_da[i] / n3 - Expr(3.0) * au * e_a[i] / n5 + Expr(m) * (uu * a(i) - au * u(i)) / n3);
  return out;
}

std::string_view to_string(Formulation f) { return f == Formulation::concircular ? "concircular" : "euler_poisson"; }

// ---------------------------------------------------------------------------
// Dynamics

Covector spin_force(const CurveJet& state, const PointGeometry& at) {
  const double n = checked_norm(state.u, at);
  const Covector star_u = hodge_star_covector(state.u, at);
  Covector out;
  for (int l = 0; l < 2; ++l)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int q = 0; q < 2; ++q) out[l] += star_u[i] * at.riemann[l][j][q][i] * state.u[j] * state.u[q];
  return (1.0 / (n * n * n)) * out;
}

SpinTensor spin_tensor(const Vector& u, const Vector& w) {
  SpinTensor s;
  for (int q = 0; q < 2; ++q)
    for (int i = 0; i < 2; ++i) s.s[q][i] = u[q] * w[i] - u[i] * w[q];
  return s;
}

Covector spin_force_rewritten(const CurveJet& state, const PointGeometry& at) {
  const double n = checked_norm(state.u, at);
  const double wedge = wedge_norm(state.u, state.w, at);
  const double scale =
      std::fabs(at.area_factor()) * (std::fabs(state.u[0] * state.w[1]) + std::fabs(state.u[1] * state.w[0]));
  if (std::fabs(wedge) <= 1e-12 * scale || wedge == 0.0)
    throw GeometryError("spin rewrite undefined: u and w are parallel");
  const SpinTensor s = spin_tensor(state.u, state.w);
  // Each bivector pair q < i once, hence the 1/2 over the full double sum.
  const double sign = (at.dot(state.u, state.u) > 0.0 ? 1.0 : -1.0) * (at.det > 0.0 ? 1.0 : -1.0);
  Covector out;
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 2; ++j)
      for (int q = 0; q < 2; ++q)
        for (int i = 0; i < 2; ++i) {
          double lowered = 0.0;
          for (int m = 0; m < 2; ++m) lowered += at.g[i][m] * at.riemann[l][j][q][m];
          out[l] += 0.5 * lowered * state.u[j] * s.s[q][i];
        }
  return (sign / (n * wedge)) * out;
}

double spin_rewrite_residual(const CurveJet& state, const PointGeometry& at) {
  const Covector d = spin_force(state, at) - spin_force_rewritten(state, at);
  return std::max(std::fabs(d[0]), std::fabs(d[1]));
}

Vector geodesic_circle_accel(const CurveJet& state, const PointGeometry& at, Formulation formulation, double m,
                             SolveInfo* info) {
  if (formulation == Formulation::concircular) {
    checked_norm(state.u, at);
    return (-at.dot(state.w, state.w)) * state.u;
  }
  if (!(m > 0.0)) throw std::invalid_argument("the Euler-Poisson formulation needs m > 0");
  const double n = checked_norm(state.u, at);
  const double uu = at.dot(state.u, state.u);
  const double uw = at.dot(state.u, state.w);
  const Covector star_w = hodge_star_covector(state.w, at);
  const Covector wl = at.lower(state.w);
  const Covector ul = at.lower(state.u);
  const Covector force = spin_force(state, at);
  Covector b;
  for (int l = 0; l < 2; ++l)
    b[l] = 3.0 * star_w[l] * uw / uu + m * (uu * wl[l] - uw * ul[l]) - n * n * n * force[l];

  // (*w')_l = w'^j e_{jl} = b_l; rows l, columns j.
  const double f = at.area_factor();
  const Matrix2 e{{{0.0, f}, {-f, 0.0}}};
  const Matrix2 a{{{e[0][0], e[1][0]}, {e[0][1], e[1][1]}}};
  const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
  double frobenius = 0.0;
  for (const auto& row : a)
    for (double v : row) frobenius += v * v;
  // Singular values of a 2x2 matrix from its Frobenius norm and determinant.
  const double gap = std::sqrt(std::max(0.0, frobenius * frobenius - 4.0 * det * det));
  const double s_max = std::sqrt(0.5 * (frobenius + gap));
  const double s_min = std::sqrt(std::max(0.0, 0.5 * (frobenius - gap)));
  const double scale = frobenius;
  const double condition = s_min > 0.0 ? s_max / s_min : std::numeric_limits<double>::infinity();
  if (info != nullptr) *info = {det, condition};
  if (!(std::fabs(det) > 1e-12 * scale))
    throw GeometryError("singular Euler-Poisson solve (condition number " + std::to_string(condition) + ")");
  return {{(a[1][1] * b[0] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det}};
}

JetPoint curve_to_jet(const JetSpace& space, const CurveJet& state, const PointGeometry& at) {
  JetPoint p(space);
  const Vector u_dot = state.w - at.gamma_contract(state.u, state.u);
  for (int i = 0; i < 2; ++i) {
    p(i, 0) = state.x[static_cast<std::size_t>(i)];
    p(i, 1) = state.u[i];
    p(i, 2) = u_dot[i];
  }
  if (state.w_prime) {
    // w_dot = w' - Gamma(u, w); u_ddot = w_dot - d_m Gamma u^m u u - 2 Gamma(u_dot, u)
    const Vector w_dot = *state.w_prime - at.gamma_contract(state.u, state.w);
    Vector u_ddot = w_dot - 2.0 * at.gamma_contract(u_dot, state.u);
    for (int i = 0; i < 2; ++i)
      for (int l = 0; l < 2; ++l)
        for (int j = 0; j < 2; ++j)
          for (int m = 0; m < 2; ++m) u_ddot[i] -= at.gamma_partial[i][l][j][m] * state.u[m] * state.u[l] * state.u[j];
    for (int i = 0; i < 2; ++i) p(i, 3) = u_ddot[i];
  }
  return p;
}

}  // namespace concircle
