#include <doctest.h>

#include <cmath>
#include <numbers>

#include "concircle/expr.hpp"
#include "concircle/mechanics.hpp"

using namespace concircle;

namespace {

const JetSpace kSpace;

std::vector<double> eval(std::span<const Expr> exprs, const JetPoint& p) { return JetMap(kSpace, exprs)(p); }

double eval(const Expr& e, const JetPoint& p) { return eval(std::span<const Expr>(&e, 1), p)[0]; }

std::vector<LabelledExpr> labelled(const std::string& prefix, const std::array<Expr, 2>& v) {
  return {{prefix + "0", v[0]}, {prefix + "1", v[1]}};
}

// Covariant state on a metric: random x in the sample box, random u, w, w'.
CurveJet random_state(SampleRng& rng) {
  CurveJet s;
  s.x = {rng.component(), rng.component()};
  s.u = {{rng.component(), rng.component()}};
  s.w = {{rng.component(), rng.component()}};
  s.w_prime = Vector{{rng.component(), rng.component()}};
  return s;
}

// Solves the flat source form E(x_3) = 0 for x_3 at a jet, using that E is affine in x_3.
Vector solve_flat_source(const Form1& source, JetPoint p) {
  const Expr e[] = {source.coeff(0, 0), source.coeff(1, 0)};
  auto at = [&](double a0, double a1) {
    p(0, 3) = a0;
    p(1, 3) = a1;
    return eval(e, p);
  };
  const auto c = at(0, 0);
  const auto c0 = at(1, 0);
  const auto c1 = at(0, 1);
  const double a00 = c0[0] - c[0], a01 = c1[0] - c[0], a10 = c0[1] - c[1], a11 = c1[1] - c[1];
  const double det = a00 * a11 - a01 * a10;
  return {{(-c[0] * a11 + c[1] * a01) / det, (-a00 * c[1] + a10 * c[0]) / det}};
}

}  // namespace

TEST_CASE("Lagrangians and jet rewriting") {
  const Metric flat = Metric::builtin("flat");
  const JetGeometry geo(flat, kSpace);
  CHECK_THROWS_AS(Lagrangian::norm(flat, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(Lagrangian("bad", Expr(1.0), std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(covariant_symbol('v', 0), std::invalid_argument);
  CHECK(Lagrangian::geodesic_circle(flat, 2.0).m() == 2.0);

  JetPoint p(kSpace);
  p(0, 1) = 1.0;
  p(1, 2) = 1.0;
  CHECK(eval(to_jet(geo, Lagrangian::curvature(flat).expr()), p) == doctest::Approx(1.0));
  CHECK(eval(to_jet(geo, Lagrangian::kinetic(flat).expr()), p) == doctest::Approx(0.5));
}

TEST_CASE("flat momenta") {
  const Metric flat = Metric::builtin("flat");
  const JetGeometry geo(flat, kSpace);
  const auto points = sample_jets(kSpace, 50);

  const Momenta kinetic = evaluate(kSpace, momenta_flat(kSpace, to_jet(geo, Lagrangian::kinetic(flat).expr())),
                                   points[0], Frame::flat);
  CHECK(kinetic.p1 == Covector{{0.0, 0.0}});
  CHECK(kinetic.p[0] == points[0](0, 1));
  CHECK(kinetic.p[1] == points[0](1, 1));
  CHECK(kinetic.frame == Frame::flat);

  JetPoint p(kSpace);
  p(0, 1) = 1.0;
  const Momenta norm =
      evaluate(kSpace, momenta_flat(kSpace, to_jet(geo, Lagrangian::norm(flat, 2.0).expr())), p, Frame::flat);
  CHECK(norm.p1 == Covector{{0.0, 0.0}});
  CHECK(norm.p[0] == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(std::fabs(norm.p[1]) < 1e-15);

  for (const Lagrangian& lagrangian : {Lagrangian::kinetic(flat), Lagrangian::norm(flat, 1.5),
                                       Lagrangian::curvature(flat), Lagrangian::geodesic_circle(flat, 0.7)}) {
    CAPTURE(lagrangian.name());
    const auto relation = momenta_relation_flat(kSpace, to_jet(geo, lagrangian.expr()));
    CHECK(evaluate_residuals(kSpace, relation, points, {1e-9, 0.0}).passed());
  }
}

TEST_CASE("covariant momenta") {
  const auto points = sample_jets(kSpace, 50);
  const Metric flat = Metric::builtin("flat");
  const JetGeometry flat_geo(flat, kSpace);

  JetPoint p(kSpace);
  p(0, 1) = 1.0;
  p(1, 2) = 1.0;
  const Momenta k = evaluate(kSpace, momenta_covariant(Lagrangian::curvature(flat), flat_geo), p, Frame::covariant);
  CHECK(k.p1[0] == doctest::Approx(0.0));
  CHECK(k.p1[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k.frame == Frame::covariant);

  // On the flat metric the covariant momenta are the flat ones.
  for (const Lagrangian& lagrangian : {Lagrangian::kinetic(flat), Lagrangian::norm(flat, 1.5),
                                       Lagrangian::curvature(flat), Lagrangian::geodesic_circle(flat, 0.7)}) {
    CAPTURE(lagrangian.name());
    const SymbolicMomenta a = momenta_covariant(lagrangian, flat_geo);
    const SymbolicMomenta b = momenta_flat(kSpace, to_jet(flat_geo, lagrangian.expr()));
    const LabelledExpr diffs[] = {{"p1_0", a.p1[0] - b.p1[0]},
                                  {"p1_1", a.p1[1] - b.p1[1]},
                                  {"p_0", a.p[0] - b.p[0]},
                                  {"p_1", a.p[1] - b.p[1]}};
    CHECK(evaluate_residuals(kSpace, diffs, points, {1e-10, 0.0}).passed());
  }

  for (const char* name : {"sphere", "hyperbolic", "polar-flat"}) {
    CAPTURE(name);
    const Metric metric = Metric::builtin(name);
    const JetGeometry geo(metric, kSpace);
    for (const Lagrangian& lagrangian : {Lagrangian::kinetic(metric), Lagrangian::curvature(metric),
                                         Lagrangian::geodesic_circle(metric, 1.3)}) {
      CAPTURE(lagrangian.name());
      const auto relation = momenta_relation_covariant(lagrangian, geo);
      CHECK(evaluate_residuals(kSpace, relation, points, {1e-8, 0.0}).passed());
    }
  }
}

TEST_CASE("Hamilton function") {
  const auto points = sample_jets(kSpace, 30);
  for (const char* name : {"flat", "sphere"}) {
    CAPTURE(name);
    const Metric metric = Metric::builtin(name);
    const JetGeometry geo(metric, kSpace);
    const Expr norm = to_jet(geo, Lagrangian::norm(metric, 1.7).expr());
    const Expr k = to_jet(geo, Lagrangian::curvature(metric).expr());
    const Expr circle = to_jet(geo, Lagrangian::geodesic_circle(metric, 1.7).expr());
    const Expr kinetic = to_jet(geo, Lagrangian::kinetic(metric).expr());
    const HamiltonForms h_norm = hamilton(kSpace, norm);
    const HamiltonForms h_circle = hamilton(kSpace, circle);
    const HamiltonForms h_kinetic = hamilton(kSpace, kinetic);
    for (const JetPoint& p : points) {
      CHECK(std::fabs(hamilton_value(kSpace, h_norm, p)) < 1e-12);
      CHECK(hamilton_value(kSpace, h_circle, p) == doctest::Approx(-eval(k, p)).epsilon(1e-12));
      CHECK(hamilton_value(kSpace, h_kinetic, p) == doctest::Approx(eval(kinetic, p)).epsilon(1e-12));
    }
  }

  // A deliberately wrong pair trips the built-in cross-check.
  const HamiltonForms broken{parse("x0_1"), parse("x0_1 + 1e-6")};
  CHECK_THROWS_AS(hamilton_value(kSpace, broken, sample_jets(kSpace, 1)[0]), std::logic_error);
}

TEST_CASE("covariant Euler-Poisson equation is minus the Lagrange derivative") {
  const auto points = sample_jets(kSpace, 50);
  for (const char* name : {"flat", "sphere", "hyperbolic", "polar-flat"}) {
    CAPTURE(name);
    const Metric metric = Metric::builtin(name);
    const JetGeometry geo(metric, kSpace);
    for (const Lagrangian& lagrangian : {Lagrangian::kinetic(metric), Lagrangian::norm(metric, 0.8),
                                         Lagrangian::geodesic_circle(metric, 1.1)}) {
      CAPTURE(lagrangian.name());
      const auto eps = euler_poisson_covariant(lagrangian, geo);
      const Form1 delta = lagrange_derivative(kSpace, to_jet(geo, lagrangian.expr()));
      const auto sum = labelled("eps + deltaL ", {eps[0] + delta.coeff(0, 0), eps[1] + delta.coeff(1, 0)});
      CHECK(evaluate_residuals(kSpace, sum, points, {1e-9, 1e-9}).passed());
    }
  }
}

TEST_CASE("flat circle solves the equation") {
  const Metric flat = Metric::builtin("flat");
  const JetGeometry geo(flat, kSpace);
  for (double m : {0.5, 1.0, 2.0}) {
    CAPTURE(m);
    // Clockwise circle of radius 1/m at unit speed.
    JetPoint p(kSpace);
    p(0, 1) = 1.0;
    p(1, 2) = -m;
    p(0, 3) = -m * m;
    const auto eps = euler_poisson_covariant(Lagrangian::geodesic_circle(flat, m), geo);
    const Expr both[] = {eps[0], eps[1]};
    for (double v : eval(both, p)) CHECK(std::fabs(v) < 1e-10);
    const Form1 e = geodesic_circle_source_form(kSpace, m);
    const Expr source[] = {e.coeff(0, 0), e.coeff(1, 0)};
    for (double v : eval(source, p)) CHECK(std::fabs(v) < 1e-10);
  }
}

TEST_CASE("curvature Lagrangian cancellation") {
  const auto points = sample_jets(kSpace, 100);
  for (const char* name : {"sphere", "hyperbolic", "polar-flat"}) {
    CAPTURE(name);
    const JetGeometry geo(Metric::builtin(name), kSpace);
    CHECK(evaluate_residuals(kSpace, labelled("cancellation ", curvature_cancellation(geo)), points, {1e-9, 0.0})
              .passed());
  }
}

TEST_CASE("flat source form") {
  const auto points = sample_jets(kSpace, 100);
  const Metric flat = Metric::builtin("flat");
  const JetGeometry geo(flat, kSpace);
  for (double m : {0.5, 1.0, 2.0}) {
    CAPTURE(m);
    const Form1 e = geodesic_circle_source_form(kSpace, m);
    CHECK(e.is_semibasic());
    CHECK(variationality_check(kSpace, e, std::span(points).first(30), {1e-9, 1e-9}).passed);

    const Form1 delta = lagrange_derivative(kSpace, to_jet(geo, Lagrangian::geodesic_circle(flat, m).expr()));
    const auto diffs = labelled("deltaL - E ", {delta.coeff(0, 0) - e.coeff(0, 0), delta.coeff(1, 0) - e.coeff(1, 0)});
    CHECK(evaluate_residuals(kSpace, diffs, points, {1e-12, 1e-8}).passed());

    // Straight lines solve it.
    JetPoint line(kSpace);
    line(0, 0) = 0.3;
    line(0, 1) = 1.2;
    line(1, 1) = -0.4;
    const Expr source[] = {e.coeff(0, 0), e.coeff(1, 0)};
    for (double v : eval(source, line)) CHECK(v == 0.0);

    // Curvature is conserved along solutions.
    const Expr dk = kSpace.total_derivative(to_jet(geo, Lagrangian::curvature(flat).expr()));
    for (std::size_t i = 0; i < 20; ++i) {
      JetPoint p = points[i];
      const Vector a3 = solve_flat_source(e, p);
      p(0, 3) = a3[0];
      p(1, 3) = a3[1];
      for (double v : eval(source, p)) CHECK(std::fabs(v) < 1e-8);
      CHECK(std::fabs(eval(dk, p)) < 1e-8);
    }
  }
  CHECK_THROWS_AS(geodesic_circle_source_form(kSpace, -1.0), std::invalid_argument);
}

TEST_CASE("geodesic circle acceleration") {
  const PointGeometry flat = Metric::builtin("flat").at({0.0, 0.0});
  CurveJet circle{{0.0, 0.0}, {{1.0, 0.0}}, {{0.0, 1.0}}, std::nullopt};
  const Vector conc = geodesic_circle_accel(circle, flat, Formulation::concircular, 0.0);
  CHECK(conc == Vector{{-1.0, 0.0}});

  for (double m : {0.5, 1.0, 2.0}) {
    CAPTURE(m);
    const CurveJet clockwise{{0.0, 0.0}, {{1.0, 0.0}}, {{0.0, -m}}, std::nullopt};
    SolveInfo info;
    const Vector w_prime = geodesic_circle_accel(clockwise, flat, Formulation::euler_poisson, m, &info);
    CHECK(std::fabs(w_prime[0] + m * m) < 1e-10);
    CHECK(std::fabs(w_prime[1]) < 1e-10);
    CHECK(info.determinant == doctest::Approx(1.0));
    CHECK(info.condition == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(geodesic_circle_accel(circle, flat, Formulation::euler_poisson, 0.0), std::invalid_argument);
  const CurveJet stopped{{0.0, 0.0}, {{0.0, 0.0}}, {{0.0, 1.0}}, std::nullopt};
  CHECK_THROWS_AS(geodesic_circle_accel(stopped, flat, Formulation::concircular, 0.0), GeometryError);
  const PointGeometry lorentz = Metric::builtin("lorentz-flat").at({0.0, 0.0});
  const CurveJet null_curve{{0.0, 0.0}, {{1.0, 1.0}}, {{0.0, 1.0}}, std::nullopt};
  CHECK_THROWS_AS(geodesic_circle_accel(null_curve, lorentz, Formulation::euler_poisson, 1.0), GeometryError);
  CHECK(to_string(Formulation::euler_poisson) == "euler_poisson");

  // The closed-form solve and the assembled covariant equation agree.
  SampleRng rng(7);
  for (const char* name : {"flat", "sphere", "hyperbolic", "polar-flat", "lorentz-flat"}) {
    CAPTURE(name);
    const Metric metric = Metric::builtin(name);
    const JetGeometry geo(metric, kSpace);
    const double m = 1.3;
    const auto eps = euler_poisson_covariant(Lagrangian::geodesic_circle(metric, m), geo);
    const Expr both[] = {eps[0], eps[1]};
    for (int trial = 0; trial < 25; ++trial) {
      CurveJet s = random_state(rng);
      const PointGeometry at = metric.at(s.x);
      if (std::fabs(at.dot(s.u, s.u)) < 0.1) continue;
      s.w_prime = geodesic_circle_accel(s, at, Formulation::euler_poisson, m);
      const JetPoint p = curve_to_jet(kSpace, s, at);
      for (double v : eval(both, p)) CHECK(std::fabs(v) < 1e-9 * std::max(1.0, std::fabs(v)));
    }
  }
}

TEST_CASE("curve_to_jet inverts the covariant state") {
  const Metric sphere = Metric::builtin("sphere");
  const JetGeometry geo(sphere, kSpace);
  SampleRng rng(11);
  const Expr fields[] = {geo.w(0), geo.w(1), geo.w_prime(0), geo.w_prime(1)};
  for (int trial = 0; trial < 20; ++trial) {
    const CurveJet s = random_state(rng);
    const PointGeometry at = sphere.at(s.x);
    const auto v = eval(fields, curve_to_jet(kSpace, s, at));
    CHECK(v[0] == doctest::Approx(s.w[0]).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(s.w[1]).epsilon(1e-12));
    CHECK(v[2] == doctest::Approx((*s.w_prime)[0]).epsilon(1e-12));
    CHECK(v[3] == doctest::Approx((*s.w_prime)[1]).epsilon(1e-12));
  }
}

TEST_CASE("flat reduction of the dynamics") {
  const Metric metric = Metric::builtin("flat");
  const PointGeometry flat = metric.at({0.0, 0.0});
  const auto points = sample_jets(kSpace, 30);
  for (double m : {0.5, 2.0}) {
    const Form1 e = geodesic_circle_source_form(kSpace, m);
    for (const JetPoint& p : points) {
      const CurveJet s{{p(0, 0), p(1, 0)}, {{p(0, 1), p(1, 1)}}, {{p(0, 2), p(1, 2)}}, std::nullopt};
      const Vector w_prime = geodesic_circle_accel(s, metric.at(s.x), Formulation::euler_poisson, m);
      const Vector expected = solve_flat_source(e, p);
      CHECK(std::fabs(w_prime[0] - expected[0]) < 1e-9 * std::max(1.0, std::fabs(expected[0])));
      CHECK(std::fabs(w_prime[1] - expected[1]) < 1e-9 * std::max(1.0, std::fabs(expected[1])));
    }
  }
  CHECK(flat.curvature == 0.0);
}

TEST_CASE("Euler-Poisson covector transforms under polar coordinates") {
  const Metric polar = Metric::builtin("polar-flat");
  const JetGeometry polar_geo(polar, kSpace);
  const JetGeometry cart_geo(Metric::builtin("flat"), kSpace);
  const double m = 0.9;
  const auto eps = euler_poisson_covariant(Lagrangian::geodesic_circle(polar, m), polar_geo);
  const Form1 cart_delta = lagrange_derivative(kSpace, to_jet(cart_geo, Lagrangian::geodesic_circle(Metric::builtin("flat"), m).expr()));

  // y = (r cos theta, r sin theta) and its derivatives along the curve.
  std::vector<Expr> chart;
  for (const Expr& y : {parse("x0_0*cos(x1_0)"), parse("x0_0*sin(x1_0)")}) {
    Expr d = y;
    for (int k = 0; k <= 4; ++k) {
      chart.push_back(d);
      d = kSpace.total_derivative(d);
    }
  }
  const Expr polar_eps[] = {eps[0], eps[1]};
  const Expr cart_eps[] = {cart_delta.coeff(0, 0), cart_delta.coeff(1, 0)};
  for (JetPoint p : sample_jets(kSpace, 50)) {
    p(0, 0) = std::fabs(p(0, 0));
    const auto y = eval(chart, p);
    JetPoint q(kSpace);
    for (int k = 0; k <= 4; ++k) {
      q(0, k) = y[static_cast<std::size_t>(k)];
      q(1, k) = y[static_cast<std::size_t>(5 + k)];
    }
    const auto a = eval(polar_eps, p);
    const auto b = eval(cart_eps, q);
    const double r = p(0, 0);
    const double th = p(1, 0);
    // J[a][l] = d y^a / d x^l
    const double jac[2][2] = {{std::cos(th), -r * std::sin(th)}, {std::sin(th), r * std::cos(th)}};
    for (int l = 0; l < 2; ++l) {
      const double pulled = -(jac[0][l] * b[0] + jac[1][l] * b[1]);
      CHECK(std::fabs(a[static_cast<std::size_t>(l)] - pulled) < 1e-8 * std::max(1.0, std::fabs(pulled)));
    }
  }
}

TEST_CASE("spin tensor and spin force") {
  const SpinTensor s = spin_tensor({{1.0, 0.0}}, {{0.0, 1.0}});
  CHECK(s.s01() == 1.0);
  CHECK(s.s[1][0] == -1.0);
  CHECK(s.s[0][0] == 0.0);

  SampleRng rng(3);
  const Metric flat = Metric::builtin("flat");
  for (int trial = 0; trial < 20; ++trial) {
    const CurveJet st = random_state(rng);
    CHECK(spin_force(st, flat.at(st.x)) == Covector{{0.0, 0.0}});
  }

  for (const char* name : {"sphere", "hyperbolic", "sphere(2)"}) {
    CAPTURE(name);
    const Metric metric = Metric::builtin(name);
    int checked = 0;
    while (checked < 50) {
      const CurveJet st = random_state(rng);
      const PointGeometry at = metric.at(st.x);
      if (std::fabs(wedge_norm(st.u, st.w, at)) < 1e-3) continue;
      CHECK(spin_rewrite_residual(st, at) < 1e-8);
      ++checked;
    }
  }

  // Indefinite metric with curvature: a conformally flat Lorentzian chart.
  const Metric lorentz = Metric::parse("conformal-lorentz", "-exp(x0)", "0", "exp(x0)", Signature::lorentzian);
  for (int trial = 0; trial < 30; ++trial) {
    const CurveJet st = random_state(rng);
    const PointGeometry at = lorentz.at(st.x);
    if (std::fabs(at.dot(st.u, st.u)) < 0.1 || std::fabs(wedge_norm(st.u, st.w, at)) < 1e-3) continue;
    CHECK(spin_rewrite_residual(st, at) < 1e-8);
  }

  const CurveJet parallel{{1.0, 0.3}, {{1.0, 0.5}}, {{2.0, 1.0}}, std::nullopt};
  CHECK_THROWS_AS(spin_force_rewritten(parallel, Metric::builtin("sphere").at(parallel.x)), GeometryError);
  CHECK(std::isfinite(spin_force(parallel, Metric::builtin("sphere").at(parallel.x))[0]));
}

TEST_CASE("Zermelo conditions and parameter independence") {
  const auto points = sample_jets(kSpace, 50);
  for (const char* name : {"flat", "sphere"}) {
    CAPTURE(name);
    const Metric metric = Metric::builtin(name);
    const JetGeometry geo(metric, kSpace);
    CHECK(zermelo_check(kSpace, to_jet(geo, Lagrangian::norm(metric, 1.4).expr()), points, {1e-10, 0.0}).passed());
    CHECK(param_independence_check(kSpace, to_jet(geo, Lagrangian::curvature(metric).expr()), points, {1e-10, 0.0})
              .passed());
    CHECK_FALSE(
        zermelo_check(kSpace, to_jet(geo, Lagrangian::kinetic(metric).expr()), points, {1e-10, 0.0}).passed());
  }
}
