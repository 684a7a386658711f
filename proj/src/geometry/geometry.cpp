#include "concircle/geometry.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "concircle/program.hpp"

namespace concircle {

std::string_view to_string(Signature s) { return s == Signature::riemannian ? "riemannian" : "lorentzian"; }

namespace {

std::size_t at2(int a, int b) { return static_cast<std::size_t>(a * 2 + b); }
std::size_t at3(int a, int b, int c) { return static_cast<std::size_t>((a * 2 + b) * 2 + c); }
std::size_t at4(int a, int b, int c, int d) { return static_cast<std::size_t>(((a * 2 + b) * 2 + c) * 2 + d); }

std::string point_text(const std::array<double, 2>& x) {
  std::ostringstream s;
  s.precision(17);
  s << '(' << x[0] << ", " << x[1] << ')';
  return s.str();
}

}  // namespace

struct Metric::Fields {
  std::string name;
  Signature signature;
  int orientation;
  std::array<Expr, 4> g;
  std::array<Expr, 4> inverse;
  Expr det;
  std::array<Expr, 8> gamma;
  std::array<Expr, 16> gamma_partial;
  std::array<Expr, 16> riemann;
  std::array<Expr, 16> riemann_lowered;
  Expr curvature;
  Program program;  // g00 g01 g11 | gamma | gamma_partial | riemann | K
};

Metric::Metric(std::string name, const std::array<Expr, 3>& components, Signature signature, int orientation) {
  if (orientation != 1 && orientation != -1) throw std::invalid_argument("orientation must be +1 or -1");
  auto f = std::make_shared<Fields>();
  f->name = std::move(name);
  f->signature = signature;
  f->orientation = orientation;
  const VarId coord[2] = {intern("x0"), intern("x1")};

  f->g = {components[0], components[1], components[1], components[2]};
  f->det = components[0] * components[2] - components[1] * components[1];
  f->inverse = {components[2] / f->det, -components[1] / f->det, -components[1] / f->det, components[0] / f->det};

  auto dg = [&](int a, int b, int m) { return diff(f->g[at2(a, b)], coord[m]); };
  for (int i = 0; i < 2; ++i)
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j) {
        if (j < l) {
          f->gamma[at3(i, l, j)] = f->gamma[at3(i, j, l)];
          continue;
        }
        Expr sum;
        for (int m = 0; m < 2; ++m) sum += f->inverse[at2(i, m)] * (dg(m, j, l) + dg(m, l, j) - dg(l, j, m));
        f->gamma[at3(i, l, j)] = Expr(0.5) * sum;
      }
  for (int i = 0; i < 2; ++i)
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j)
        for (int m = 0; m < 2; ++m) f->gamma_partial[at4(i, l, j, m)] = diff(f->gamma[at3(i, l, j)], coord[m]);

  auto gam = [&](int i, int l, int j) -> const Expr& { return f->gamma[at3(i, l, j)]; };
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 2; ++j)
      for (int q = 0; q < 2; ++q)
        for (int i = 0; i < 2; ++i) {
          Expr r = f->gamma_partial[at4(i, l, q, j)] - f->gamma_partial[at4(i, j, q, l)];
          for (int m = 0; m < 2; ++m) r += gam(i, j, m) * gam(m, l, q) - gam(i, l, m) * gam(m, j, q);
          f->riemann[at4(l, j, q, i)] = r;
        }
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 2; ++j)
      for (int q = 0; q < 2; ++q)
        for (int i = 0; i < 2; ++i) {
          Expr r;
          for (int m = 0; m < 2; ++m) r += f->g[at2(i, m)] * f->riemann[at4(l, j, q, m)];
          f->riemann_lowered[at4(l, j, q, i)] = r;
        }
  f->curvature = f->riemann_lowered[at4(0, 1, 0, 1)] / f->det;

  std::vector<Expr> roots{components[0], components[1], components[2]};
  roots.insert(roots.end(), f->gamma.begin(), f->gamma.end());
  roots.insert(roots.end(), f->gamma_partial.begin(), f->gamma_partial.end());
  roots.insert(roots.end(), f->riemann.begin(), f->riemann.end());
  roots.push_back(f->curvature);
  for (const Expr& r : roots)
    for (VarId v : free_variables(r))
      if (v != coord[0] && v != coord[1])
        throw GeometryError("metric '" + f->name + "' depends on '" + var_name(v) + "'; only x0 and x1 are allowed");
  f->program = Program(roots, {coord[0], coord[1]});
  fields_ = std::move(f);
}

Metric Metric::builtin(std::string_view spec, int orientation) {
  const Expr x0 = Expr::variable("x0");
  const Expr x1 = Expr::variable("x1");
  if (spec == "flat") return Metric("flat", {Expr(1.0), Expr(), Expr(1.0)}, Signature::riemannian, orientation);
  if (spec == "polar-flat")
    return Metric("polar-flat", {Expr(1.0), Expr(), square(x0)}, Signature::riemannian, orientation);
  if (spec == "hyperbolic") {
    const Expr c = Expr(1.0) / square(x1);
    return Metric("hyperbolic", {c, Expr(), c}, Signature::riemannian, orientation);
  }
  if (spec == "lorentz-flat")
    return Metric("lorentz-flat", {Expr(1.0), Expr(), Expr(-1.0)}, Signature::lorentzian, orientation);
  if (spec == "sphere" || (spec.starts_with("sphere(") && spec.ends_with(")"))) {
    double radius = 1.0;
    if (spec != "sphere") {
      const std::string inner(spec.substr(7, spec.size() - 8));
      std::size_t used = 0;
      try {
        radius = std::stod(inner, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != inner.size() || !(radius > 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("sphere radius must be a positive number, got '" + inner + "'");
    }
    const Expr r2(radius * radius);
    std::ostringstream name;
    name.precision(17);
    name << "sphere(" << radius << ')';
    return Metric(name.str(), {r2, Expr(), r2 * square(sin(x0))}, Signature::riemannian, orientation);
  }
  throw std::invalid_argument("unknown metric '" + std::string(spec) + "'");
}

Metric Metric::parse(std::string name, std::string_view g00, std::string_view g01, std::string_view g11,
                     Signature signature, int orientation) {
  return Metric(std::move(name), {concircle::parse(g00), concircle::parse(g01), concircle::parse(g11)}, signature,
                orientation);
}

const std::string& Metric::name() const noexcept { return fields_->name; }
Signature Metric::signature() const noexcept { return fields_->signature; }
int Metric::orientation() const noexcept { return fields_->orientation; }
const Expr& Metric::g(int i, int j) const { return fields_->g.at(at2(i, j)); }
const Expr& Metric::inverse(int i, int j) const { return fields_->inverse.at(at2(i, j)); }
const Expr& Metric::det() const { return fields_->det; }
const Expr& Metric::christoffel(int i, int l, int j) const { return fields_->gamma.at(at3(i, l, j)); }
const Expr& Metric::christoffel_partial(int i, int l, int j, int m) const {
  return fields_->gamma_partial.at(at4(i, l, j, m));
}
const Expr& Metric::riemann(int l, int j, int q, int i) const { return fields_->riemann.at(at4(l, j, q, i)); }
const Expr& Metric::riemann_lowered(int l, int j, int q, int i) const {
  return fields_->riemann_lowered.at(at4(l, j, q, i));
}
const Expr& Metric::gaussian_curvature() const { return fields_->curvature; }

PointGeometry Metric::at(const std::array<double, 2>& x) const {
  std::vector<double> out;
  try {
    out = fields_->program(x);
  } catch (const EvalError& e) {
    throw GeometryError("metric '" + name() + "' cannot be evaluated at " + point_text(x) + ": " + e.what());
  }
  PointGeometry p;
  p.x = x;
  p.signature = signature();
  p.orientation = orientation();
  p.g = {{{out[0], out[1]}, {out[1], out[2]}}};
  p.det = out[0] * out[2] - out[1] * out[1];
  const double scale = std::fabs(out[0] * out[2]) + out[1] * out[1];
  if (!(std::fabs(p.det) > 1e-12 * scale)) throw GeometryError("degenerate metric at " + point_text(x));
  p.inverse = {{{out[2] / p.det, -out[1] / p.det}, {-out[1] / p.det, out[0] / p.det}}};
  std::size_t k = 3;
  for (int i = 0; i < 2; ++i)
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j) p.gamma[i][l][j] = out[k++];
  for (int i = 0; i < 2; ++i)
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j)
        for (int m = 0; m < 2; ++m) p.gamma_partial[i][l][j][m] = out[k++];
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 2; ++j)
      for (int q = 0; q < 2; ++q)
        for (int i = 0; i < 2; ++i) p.riemann[l][j][q][i] = out[k++];
  p.curvature = out[k];
  for (double v : out)
    if (!std::isfinite(v)) throw GeometryError("non-finite metric data at " + point_text(x));
  return p;
}

void Metric::check_signature(const std::array<double, 2>& x) const {
  const PointGeometry p = at(x);
  const bool ok = signature() == Signature::riemannian ? (p.det > 0.0 && p.g[0][0] > 0.0) : p.det < 0.0;
  if (!ok)
    throw GeometryError("metric '" + name() + "' is not " + std::string(to_string(signature())) + " at " +
                        point_text(x));
}

// ---------------------------------------------------------------------------
// Numeric operations

double PointGeometry::dot(const Vector& a, const Vector& b) const {
  double s = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s += g[i][j] * a[i] * b[j];
  return s;
}

Covector PointGeometry::lower(const Vector& v) const {
  return {{g[0][0] * v[0] + g[0][1] * v[1], g[1][0] * v[0] + g[1][1] * v[1]}};
}

Vector PointGeometry::raise(const Covector& s) const {
  return {{inverse[0][0] * s[0] + inverse[0][1] * s[1], inverse[1][0] * s[0] + inverse[1][1] * s[1]}};
}

Vector PointGeometry::gamma_contract(const Vector& a, const Vector& b) const {
  Vector out;
  for (int i = 0; i < 2; ++i)
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j) out[i] += gamma[i][l][j] * a[l] * b[j];
  return out;
}

double PointGeometry::area_factor() const { return orientation * std::sqrt(std::fabs(det)); }

double wedge_norm(const Vector& a, const Vector& b, const PointGeometry& at) {
  return at.area_factor() * (a[0] * b[1] - a[1] * b[0]);
}

Covector hodge_star_covector(const Vector& v, const PointGeometry& at) {
  // e_{01} = f, e_{10} = -f.
  const double f = at.area_factor();
  return {{-f * v[1], f * v[0]}};
}

Vector hodge_star(const Vector& v, const PointGeometry& at) { return at.raise(hodge_star_covector(v, at)); }

double bivector_dot(const Vector& a, const Vector& b, const Vector& v, const Vector& w, const PointGeometry& at) {
  return at.dot(a, v) * at.dot(b, w) - at.dot(a, w) * at.dot(b, v);
}

double checked_norm(const Vector& v, const PointGeometry& at, double floor) {
  const double q = at.dot(v, v);
  double scale = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) scale += std::fabs(at.g[i][j] * v[i] * v[j]);
  if (std::fabs(q) <= 1e-12 * scale) throw GeometryError("null velocity at " + point_text(at.x));
  const double n = std::sqrt(std::fabs(q));
  if (!(n > floor)) throw GeometryError("velocity below the floor at " + point_text(at.x));
  return n;
}

double frenet_curvature(const CurveJet& jet, const PointGeometry& at) {
  const double n = checked_norm(jet.u, at);
  return wedge_norm(jet.u, jet.w, at) / (n * n * n);
}

double frenet_curvature(const CurveJet& jet, const Metric& metric) { return frenet_curvature(jet, metric.at(jet.x)); }

Vector covariant_prime(const Vector& xi, const Vector& xi_dot, const Vector& u, const PointGeometry& at) {
  return xi_dot + at.gamma_contract(u, xi);
}

Covector covariant_prime(const Covector& s, const Covector& s_dot, const Vector& u, const PointGeometry& at) {
  Covector out = s_dot;
  for (int i = 0; i < 2; ++i)
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j) out[i] -= at.gamma[l][j][i] * u[j] * s[l];
  return out;
}

// ---------------------------------------------------------------------------
// Jet-space geometry

JetGeometry::JetGeometry(Metric metric, JetSpace space) : metric_(std::move(metric)), space_(std::move(space)) {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      g_[at2(i, j)] = space_.lift_base(metric_.g(i, j));
      inverse_[at2(i, j)] = space_.lift_base(metric_.inverse(i, j));
    }
  for (int i = 0; i < 2; ++i)
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j) gamma_[at3(i, l, j)] = space_.lift_base(metric_.christoffel(i, l, j));
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 2; ++j)
      for (int q = 0; q < 2; ++q)
        for (int i = 0; i < 2; ++i) {
          riemann_[at4(l, j, q, i)] = space_.lift_base(metric_.riemann(l, j, q, i));
          riemann_lowered_[at4(l, j, q, i)] = space_.lift_base(metric_.riemann_lowered(l, j, q, i));
        }
  curvature_ = space_.lift_base(metric_.gaussian_curvature());
  area_ = Expr(static_cast<double>(metric_.orientation())) * sqrt(abs(space_.lift_base(metric_.det())));

  for (int i = 0; i < 2; ++i) {
    Expr s = space_.symbol(i, 2);
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j) s += christoffel(i, l, j) * u(l) * u(j);
    w_[static_cast<std::size_t>(i)] = s;
  }
  w_prime_ = covariant_prime_vector(w_);
}

std::array<Expr, 2> JetGeometry::covariant_prime_vector(const std::array<Expr, 2>& xi) const {
  std::array<Expr, 2> out;
  for (int i = 0; i < 2; ++i) {
    Expr s = space_.total_derivative(xi[static_cast<std::size_t>(i)]);
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j) s += christoffel(i, l, j) * u(l) * xi[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

std::array<Expr, 2> JetGeometry::covariant_prime_covector(const std::array<Expr, 2>& sigma) const {
  std::array<Expr, 2> out;
  for (int i = 0; i < 2; ++i) {
    Expr s = space_.total_derivative(sigma[static_cast<std::size_t>(i)]);
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j) s -= christoffel(l, j, i) * u(j) * sigma[static_cast<std::size_t>(l)];
    out[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

namespace {

void axpy(Form1& out, const Expr& factor, const Form1& f) {
  for (int k = 0; k <= f.max_order(); ++k)
    for (int i = 0; i < 2; ++i)
      if (!f.coeff(i, k).is_zero()) out.add(i, k, factor * f.coeff(i, k));
}

void append_components(std::vector<LabelledExpr>& out, const std::string& prefix, const Form1& f) {
  for (LabelledExpr& c : components(f)) out.push_back({prefix + " " + c.label, std::move(c.expr)});
}

// (Du)^i = dx_1^i + Gamma^i_{lj} u^j dx_0^l.
std::array<Form1, 2> covariant_differential_of_velocity(const JetGeometry& geo) {
  std::array<Form1, 2> du{Form1(geo.space()), Form1(geo.space())};
  for (int i = 0; i < 2; ++i) {
    Form1& f = du[static_cast<std::size_t>(i)];
    f.add(i, 1, Expr(1.0));
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j) f.add(l, 0, geo.christoffel(i, l, j) * geo.u(j));
  }
  return du;
}

// Prime of a vector-valued 1-form: Lie derivative along d_T plus the connection term.
std::array<Form1, 2> prime(const JetGeometry& geo, const std::array<Form1, 2>& omega) {
  std::array<Form1, 2> out{total_derivative(geo.space(), omega[0]), total_derivative(geo.space(), omega[1])};
  for (int i = 0; i < 2; ++i)
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < 2; ++j)
        axpy(out[static_cast<std::size_t>(i)], geo.christoffel(i, l, j) * geo.u(l), omega[static_cast<std::size_t>(j)]);
  return out;
}

std::string component_prefix(const char* what, int i) { return std::string(what) + "[" + std::to_string(i) + "]"; }

}  // namespace

std::vector<LabelledExpr> christoffel_identity_residuals(const JetGeometry& geo) {
  std::vector<LabelledExpr> out;
  const JetSpace& s = geo.space();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int q = 0; q < 2; ++q) {
        Expr r = -diff(geo.g(i, j), s.var(q, 0));
        for (int l = 0; l < 2; ++l) r += geo.g(j, l) * geo.christoffel(l, q, i) + geo.g(i, l) * geo.christoffel(l, q, j);
        if (!r.is_zero())
          out.push_back({"christoffel identity i=" + std::to_string(i) + " j=" + std::to_string(j) +
                             " q=" + std::to_string(q),
                         r});
      }
  return out;
}

std::vector<LabelledExpr> riemann_residuals(const JetGeometry& geo) {
  std::vector<LabelledExpr> out;
  const Expr& k = geo.gaussian_curvature();
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 2; ++j)
      for (int q = 0; q < 2; ++q)
        for (int i = 0; i < 2; ++i) {
          const std::string idx = std::to_string(l) + std::to_string(j) + std::to_string(q) + std::to_string(i);
          const Expr rec =
              geo.riemann_lowered(l, j, q, i) - k * (geo.g(l, q) * geo.g(j, i) - geo.g(l, i) * geo.g(j, q));
          if (!rec.is_zero()) out.push_back({"riemann reconstruction " + idx, rec});
          const Expr anti = geo.riemann(l, j, q, i) + geo.riemann(j, l, q, i);
          if (!anti.is_zero()) out.push_back({"riemann antisymmetry " + idx, anti});
        }
  return out;
}

std::vector<LabelledExpr> commutator_residuals(const JetGeometry& geo, RiemannConvention convention) {
  const std::array<Form1, 2> du = covariant_differential_of_velocity(geo);
  const std::array<Form1, 2> du_prime = prime(geo, du);
  std::vector<LabelledExpr> out;
  for (int i = 0; i < 2; ++i) {
    Form1 r = du_prime[static_cast<std::size_t>(i)];
    // D(u')^i = d w^i + Gamma^i_{lj} w^j dx^l
    axpy(r, Expr(-1.0), exterior_d(geo.space(), geo.w(i)));
    for (int l = 0; l < 2; ++l) {
      Expr c;
      for (int j = 0; j < 2; ++j) {
        c += geo.christoffel(i, l, j) * geo.w(j);
        for (int q = 0; q < 2; ++q) {
          const Expr& rr = geo.riemann(l, j, q, i);
          c += (convention == RiemannConvention::pinned ? rr : -rr) * geo.u(j) * geo.u(q);
        }
      }
      r.add(l, 0, -c);
    }
    append_components(out, component_prefix("curvature commutator", i), r);
  }
  return out;
}

std::vector<LabelledExpr> first_order_commutator_residuals(const JetGeometry& geo) {
  std::array<Form1, 2> dx{Form1(geo.space()), Form1(geo.space())};
  dx[0].add(0, 0, Expr(1.0));
  dx[1].add(1, 0, Expr(1.0));
  const std::array<Form1, 2> dx_prime = prime(geo, dx);
  const std::array<Form1, 2> du = covariant_differential_of_velocity(geo);
  std::vector<LabelledExpr> out;
  for (int i = 0; i < 2; ++i) {
    Form1 r = dx_prime[static_cast<std::size_t>(i)];
    axpy(r, Expr(-1.0), du[static_cast<std::size_t>(i)]);
    append_components(out, component_prefix("first-order commutator", i), r);
  }
  return out;
}

CommutatorResult commutator_check(const JetGeometry& geo, std::span<const JetPoint> samples,
                                  RiemannConvention convention, Tolerance tolerance) {
  const auto curvature = commutator_residuals(geo, convention);
  const auto first_order = first_order_commutator_residuals(geo);
  return {evaluate_residuals(geo.space(), curvature, samples, tolerance),
          evaluate_residuals(geo.space(), first_order, samples, tolerance)};
}

}  // namespace concircle
