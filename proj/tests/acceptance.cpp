// Acceptance run: one PASS/FAIL line per criterion. Pass -v to list every
// sub-check. Exit status is the number of failed criteria (capped at 9).

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "concircle/cli/commands.hpp"
#include "concircle/integrate.hpp"
#include "concircle/mechanics.hpp"

using namespace concircle;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr Tolerance kDeltaSquared{0.0, 1e-7};
constexpr double kDeltaSquaredSeconds = 10.0;
constexpr std::size_t kDeltaSquaredPoints = 100;
constexpr Tolerance kSourceForm{1e-8, 0.0};
constexpr double kCircleFit = 1e-6;
constexpr double kClosure = 1e-6;
constexpr double kRadius = 1e-6;
constexpr double kCurvatureDrift = 1e-6;
constexpr double kHamilton = 1e-8;
constexpr Tolerance kChristoffel{1e-9, 0.0};
constexpr Tolerance kCommutator{1e-8, 0.0};
constexpr double kGaussian = 1e-8;
constexpr std::size_t kGeometryPoints = 20;
constexpr Tolerance kMomenta{1e-8, 0.0};
constexpr std::size_t kMomentaPoints = 50;
constexpr double kSpinRewrite = 1e-8;
constexpr double kFlatSpin = 1e-12;
constexpr std::size_t kSpinPoints = 50;
constexpr double kNegativeControl = 1e-3;
constexpr double kOrder = 4.0;
constexpr double kOrderTolerance = 0.3;
constexpr double kStep = 1e-3;

struct SubCheck {
  std::string label;
  double value = 0.0;
  double bound = 0.0;
  /// Lower bound instead of upper bound.
  bool above = false;

  bool passed() const { return above ? value > bound : value < bound; }
  double ratio() const { return above ? bound / std::max(value, 1e-300) : value / bound; }
};

class Criterion {
 public:
  Criterion(int number, std::string title) : number_(number), title_(std::move(title)) {}

  void below(std::string label, double value, double bound) { checks_.push_back({std::move(label), value, bound, false}); }
  void above(std::string label, double value, double bound) { checks_.push_back({std::move(label), value, bound, true}); }
  void fail(std::string label, const std::string& why) {
    errors_.push_back(label + ": " + why);
  }
  /// A residual report passes when every row satisfies its own tolerance;
  /// recorded as the worst tolerance ratio against 1.
  void report(std::string label, const ResidualReport& r) {
    const ResidualRow* worst = r.worst();
    const double ratio = worst ? r.tolerance.ratio(worst->value, worst->scale) : 0.0;
    below(std::move(label) + " (|r|/(atol+rtol*scale))", ratio, 1.0 + 1e-15);
  }

  bool passed() const {
    if (!errors_.empty()) return false;
    for (const SubCheck& c : checks_)
      if (!c.passed()) return false;
    return !checks_.empty();
  }

  void print(bool verbose) const {
    const SubCheck* worst = nullptr;
    for (const SubCheck& c : checks_)
      if (worst == nullptr || c.ratio() > worst->ratio()) worst = &c;
    std::ostringstream line;
    line << (passed() ? "PASS" : "FAIL") << "  criterion " << number_ << ": " << title_;
    if (!errors_.empty())
      line << "  [error: " << errors_.front() << "]";
    else if (worst != nullptr)
      line << "  [worst: " << worst->label << " = " << worst->value << (worst->above ? " > " : " < ") << worst->bound
           << "]";
    std::cout << line.str() << '\n';
    if (!verbose) return;
    for (const SubCheck& c : checks_)
      std::cout << "      " << (c.passed() ? "ok  " : "bad ") << c.label << " = " << c.value
                << (c.above ? " > " : " < ") << c.bound << '\n';
    for (const std::string& e : errors_) std::cout << "      bad " << e << '\n';
  }

  template <typename F>
  void guarded(const std::string& label, F&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      fail(label, e.what());
    }
  }

 private:
  int number_;
  std::string title_;
  std::vector<SubCheck> checks_;
  std::vector<std::string> errors_;
};

std::vector<LabelledExpr> difference(const Form1& a, const Form1& b) {
  std::vector<LabelledExpr> out;
  for (int k = 0; k <= std::max(a.max_order(), b.max_order()); ++k)
    for (int i = 0; i < 2; ++i) {
      const Expr lhs = k <= a.max_order() ? a.coeff(i, k) : Expr();
      const Expr rhs = k <= b.max_order() ? b.coeff(i, k) : Expr();
      out.push_back({"dx" + std::to_string(i) + "_" + std::to_string(k), lhs - rhs});
    }
  return out;
}

std::vector<Lagrangian> corpus(const Metric& metric, double m) {
  return {Lagrangian::kinetic(metric), Lagrangian::norm(metric, m), Lagrangian::curvature(metric),
          Lagrangian::geodesic_circle(metric, m)};
}

std::string with_m(const std::string& label, double m) {
  std::ostringstream s;
  s << label << " m=" << m;
  return s.str();
}

IntegratorConfig rk4(Formulation formulation, double m, double t_end) {
  IntegratorConfig c;
  c.method = Method::rk4;
  c.formulation = formulation;
  c.m = m;
  c.step = kStep;
  c.t_end = t_end;
  return c;
}

struct CircleFit {
  std::array<double, 2> centre{};
  double radius = 0.0;
  double rms = 0.0;
};

// Algebraic (Kasa) least-squares fit of x^2 + y^2 + D x + E y + F = 0.
CircleFit fit_circle(const std::vector<TrajectorySample>& samples) {
  // Centre the data first to keep the normal equations well conditioned.
  double mx = 0.0, my = 0.0;
  for (const auto& s : samples) {
    mx += s.x[0];
    my += s.x[1];
  }
  mx /= samples.size();
  my /= samples.size();
  std::array<std::array<double, 4>, 3> a{};
  for (const auto& s : samples) {
    const double x = s.x[0] - mx, y = s.x[1] - my;
    const double row[3] = {x, y, 1.0};
    const double rhs = -(x * x + y * y);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a[i][j] += row[i] * row[j];
      a[i][3] += row[i] * rhs;
    }
  }
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
    }
  }
  const double d = a[0][3] / a[0][0], e = a[1][3] / a[1][1], f = a[2][3] / a[2][2];
  CircleFit fit;
  fit.centre = {-d / 2 + mx, -e / 2 + my};
  fit.radius = std::sqrt(d * d / 4 + e * e / 4 - f);
  double sum = 0.0;
  for (const auto& s : samples) {
    const double r = std::hypot(s.x[0] - fit.centre[0], s.x[1] - fit.centre[1]) - fit.radius;
    sum += r * r;
  }
  fit.rms = std::sqrt(sum / samples.size());
  return fit;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Criterion delta_squared() {
  Criterion c(1, "delta^2 L = 0 on the Lagrangian corpus (100 jets, relative 1e-7, under 10 s)");
  const auto start = std::chrono::steady_clock::now();
  c.guarded("delta^2", [&] {
    const JetSpace space;
    const std::vector<JetPoint> points = sample_jets(space, kDeltaSquaredPoints);
    for (const char* name : {"flat", "sphere"}) {
      const Metric metric = Metric::builtin(name);
      const JetGeometry geo(metric, space);
      for (const Lagrangian& l : corpus(metric, 1.0)) {
        const Form1 delta = lagrange_derivative(space, to_jet(geo, l.expr()));
        c.report(std::string(name) + "/" + l.name(),
                 evaluate_residuals(space, components(lagrange_derivative1(space, delta)), points, kDeltaSquared));
      }
    }
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.below("runtime seconds", seconds, kDeltaSquaredSeconds);
  return c;
}

Criterion source_form() {
  Criterion c(2, "source form is variational and is the Lagrange derivative of k - m|u| (1e-8)");
  c.guarded("source form", [&] {
    const JetSpace space;
    const Metric flat = Metric::builtin("flat");
    const JetGeometry geo(flat, space);
    const std::vector<JetPoint> points = sample_jets(space, 50);
    for (double m : {0.5, 1.0, 2.0}) {
      const Form1 source = geodesic_circle_source_form(space, m);
      c.below(with_m("max |delta E|", m), variationality_check(space, source, points, kSourceForm).max_residual,
              kSourceForm.atol);
      const Form1 from_l = lagrange_derivative(space, to_jet(geo, Lagrangian::geodesic_circle(flat, m).expr()));
      c.below(with_m("max |delta L - E|", m), evaluate_residuals(space, difference(from_l, source), points).max_abs(),
              kSourceForm.atol);
    }
  });
  return c;
}

Criterion flat_circles() {
  Criterion c(3, "flat Euler-Poisson extremals are circles of radius 1/m (rk4, h = 1e-3)");
  const Metric flat = Metric::builtin("flat");
  for (double m : {0.5, 1.0, 2.0}) {
    c.guarded(with_m("flat circle", m), [&] {
      const CurveJet start = natural_initial_state(flat, {0.0, 0.0}, 0.0, -m);
      const Trajectory t = integrate(flat, start, rk4(Formulation::euler_poisson, m, 2.0 * std::numbers::pi / m));
      if (!t.complete()) throw std::runtime_error(*t.error);
      const CircleFit fit = fit_circle(t.samples);
      c.below(with_m("circle-fit rms", m), fit.rms, kCircleFit);
      c.below(with_m("|radius - 1/m|", m), std::fabs(fit.radius - 1.0 / m), kRadius);
      const auto& first = t.samples.front().x;
      const auto& last = t.samples.back().x;
      c.below(with_m("closure after 2 pi/m", m), std::hypot(last[0] - first[0], last[1] - first[1]), kClosure);
    });
  }
  return c;
}

Criterion constant_curvature() {
  Criterion c(4, "k(t) constant on flat, sphere, hyperbolic for both formulations; H = -k (t in [0, 10])");
  struct Case {
    const char* metric;
    std::array<double, 2> x;
    double heading;
    double curvature;
    double m;
  };
  const Case cases[] = {
      {"flat", {0.0, 0.0}, 0.4, -0.7, 1.3},
      {"sphere", {std::numbers::pi / 2, 0.2}, 0.3, -2.0, 2.5},
      {"hyperbolic", {0.1, 1.5}, -0.8, 0.6, 1.0},
  };
  for (const Case& k : cases) {
    for (Formulation f : {Formulation::concircular, Formulation::euler_poisson}) {
      const std::string label = std::string(k.metric) + "/" + std::string(to_string(f));
      c.guarded(label, [&] {
        const Metric metric = Metric::builtin(k.metric);
        const Trajectory t =
            integrate(metric, natural_initial_state(metric, k.x, k.heading, k.curvature), rk4(f, k.m, 10.0));
        if (!t.complete()) throw std::runtime_error(*t.error);
        double drift = 0.0, hamilton = 0.0;
        for (const TrajectorySample& s : t.samples) {
          drift = std::max(drift, std::fabs(s.curvature - t.samples.front().curvature));
          hamilton = std::max(hamilton, std::fabs(s.hamilton + s.curvature));
        }
        c.below(label + " max |k(t) - k(0)|", drift, kCurvatureDrift);
        c.below(label + " max |H + k|", hamilton, kHamilton);
      });
    }
  }
  return c;
}

Criterion curvature_machinery() {
  Criterion c(5, "Christoffel identity, commutator curvature, Gaussian curvature 0, +1, -1 (20 points)");
  struct Case {
    const char* metric;
    double curvature;
  };
  for (const Case k : {Case{"flat", 0.0}, Case{"sphere", 1.0}, Case{"hyperbolic", -1.0}}) {
    c.guarded(k.metric, [&] {
      const JetSpace space;
      const Metric metric = Metric::builtin(k.metric);
      const JetGeometry geo(metric, space);
      const std::vector<JetPoint> points = sample_jets(space, kGeometryPoints);
      const std::string name = k.metric;
      c.below(name + " christoffel identity",
              evaluate_residuals(space, christoffel_identity_residuals(geo), points).max_abs(), kChristoffel.atol);
      const CommutatorResult commutator = commutator_check(geo, points, RiemannConvention::pinned, kCommutator);
      c.below(name + " commutator residual", commutator.curvature.max_abs(), kCommutator.atol);
      double worst = 0.0;
      for (const JetPoint& p : points)
        worst = std::max(worst, std::fabs(metric.at({p(0, 0), p(1, 0)}).curvature - k.curvature));
      c.below(name + " |K - expected|", worst, kGaussian);
    });
  }
  return c;
}

Criterion momenta() {
  Criterion c(6, "flat and covariant momenta relations (50 jets, flat and sphere, 1e-8)");
  for (const char* name : {"flat", "sphere"}) {
    c.guarded(name, [&] {
      const JetSpace space;
      const Metric metric = Metric::builtin(name);
      const JetGeometry geo(metric, space);
      const std::vector<JetPoint> points = sample_jets(space, kMomentaPoints);
      for (const Lagrangian& l : corpus(metric, 1.0)) {
        const std::string label = std::string(name) + "/" + l.name();
        c.below(label + " flat relation",
                evaluate_residuals(space, momenta_relation_flat(space, to_jet(geo, l.expr())), points).max_abs(),
                kMomenta.atol);
        c.below(label + " covariant relation",
                evaluate_residuals(space, momenta_relation_covariant(l, geo), points).max_abs(), kMomenta.atol);
      }
    });
  }
  return c;
}

Criterion spin() {
  Criterion c(7, "spin force rewrite on 50 sphere jets (1e-8); flat spin force vanishes (1e-12)");
  c.guarded("spin", [&] {
    const Metric sphere = Metric::builtin("sphere");
    const Metric flat = Metric::builtin("flat");
    SampleRng rng(kDefaultSeed);
    double rewrite = 0.0, flat_force = 0.0;
    std::size_t accepted = 0;
    while (accepted < kSpinPoints) {
      const CurveJet state{{rng.uniform(0.3, std::numbers::pi - 0.3), rng.uniform(-3.0, 3.0)},
                           {{rng.component(), rng.component()}},
                           {{rng.component(), rng.component()}},
                           std::nullopt};
      const PointGeometry at = sphere.at(state.x);
      // Non-degenerate: u well away from zero and from parallel to w.
      if (at.dot(state.u, state.u) < 0.1 || std::fabs(wedge_norm(state.u, state.w, at)) < 1e-2) continue;
      rewrite = std::max(rewrite, spin_rewrite_residual(state, at));
      const Covector f = spin_force(state, flat.at(state.x));
      flat_force = std::max({flat_force, std::fabs(f[0]), std::fabs(f[1])});
      ++accepted;
    }
    c.below("sphere rewrite residual", rewrite, kSpinRewrite);
    c.below("flat spin force", flat_force, kFlatSpin);
  });
  return c;
}

Criterion negative_control() {
  Criterion c(8, "variationality check rejects E_i = u_ddot_i (residual > 1e-3)");
  c.guarded("corrupted source", [&] {
    const JetSpace space;
    Form1 corrupted(space);
    corrupted.set(0, 0, space.symbol(0, 3));
    corrupted.set(1, 0, space.symbol(1, 3));
    const VariationalityResult r = variationality_check(space, corrupted, sample_jets(space, 50));
    c.above("max |delta E|", r.max_residual, kNegativeControl);
    c.below("check verdict (1 = accepted)", r.passed ? 1.0 : 0.0, 0.5);
  });
  return c;
}

Criterion integrator_quality() {
  Criterion c(9, "rk4 order 4 +- 0.3 on the flat circle; byte-identical CSV across two runs");
  c.guarded("order", [&] {
    const Metric flat = Metric::builtin("flat");
    const std::vector<double> steps = {4e-3, 2e-3, 1e-3};
    const ConvergenceResult r = convergence_probe(flat, natural_initial_state(flat, {0.0, 0.0}, 0.0, -1.0),
                                                  rk4(Formulation::euler_poisson, 1.0, 2.0 * std::numbers::pi), steps);
    c.below("|observed order - 4|", std::fabs(r.observed_order - kOrder), kOrderTolerance);
    c.below("inconclusive probe", r.conclusive ? 0.0 : 1.0, 0.5);
  });
  c.guarded("determinism", [&] {
    std::random_device rd;
    const fs::path root = fs::temp_directory_path() / ("concircle-acceptance-" + std::to_string(rd()));
    fs::create_directories(root);
    const fs::path config = root / "flat-circle.toml";
    std::ofstream(config, std::ios::binary) << "[metric]\nbuiltin = \"flat\"\n[lagrangian]\nm = 1.0\n"
                                               "[integration]\nformulation = \"euler_poisson\"\nstep = 1e-3\n"
                                               "t_end = 6.283185307179586\n[[integration.initial]]\n"
                                               "x = [0.0, 0.0]\nheading = 0.0\ncurvature = -1.0\n";
    std::string runs[2];
    for (int i = 0; i < 2; ++i) {
      const std::string out = (root / ("run-" + std::to_string(i))).string();
      const std::string cfg = config.string();
      const char* argv[] = {"concircle", "integrate", "--config", cfg.c_str(), "--out", out.c_str()};
      std::ostringstream sink;
      auto* old = std::cout.rdbuf(sink.rdbuf());
      const int code = cli::run(6, argv);
      std::cout.rdbuf(old);
      if (code != cli::kExitPass) throw std::runtime_error("integrate exited with " + std::to_string(code));
      runs[i] = read_file(fs::path(out) / "trajectory-0.csv");
    }
    std::error_code ec;
    fs::remove_all(root, ec);
    c.below("CSV bytes differ (1 = differ)", runs[0].empty() || runs[0] != runs[1] ? 1.0 : 0.0, 0.5);
  });
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  const bool verbose = argc > 1 && std::string_view(argv[1]) == "-v";
  const std::function<Criterion()> criteria[] = {delta_squared, source_form,         flat_circles,
                                                 constant_curvature, curvature_machinery, momenta,
                                                 spin,          negative_control,    integrator_quality};
  int failed = 0;
  for (const auto& run : criteria) {
    const Criterion c = run();
    c.print(verbose);
    std::cout.flush();
    if (!c.passed()) ++failed;
  }
  std::cout << (failed == 0 ? "all 9 criteria passed" : std::to_string(failed) + " of 9 criteria failed") << '\n';
  return failed;
}
