#include "concircle/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace concircle::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string short_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

std::vector<Lagrangian> corpus(const Metric& metric, double m) {
  return {Lagrangian::kinetic(metric), Lagrangian::norm(metric, m), Lagrangian::curvature(metric),
          Lagrangian::geodesic_circle(metric, m)};
}

std::vector<LabelledExpr> form_difference(const Form1& a, const Form1& b) {
  std::vector<LabelledExpr> out;
  const int top = std::max(a.max_order(), b.max_order());
  for (int k = 0; k <= top; ++k)
    for (int i = 0; i < 2; ++i) {
      const Expr lhs = k <= a.max_order() ? a.coeff(i, k) : Expr();
      const Expr rhs = k <= b.max_order() ? b.coeff(i, k) : Expr();
      const Expr d = lhs - rhs;
      if (!d.is_zero()) out.push_back({"dx" + std::to_string(i) + "_" + std::to_string(k), d});
    }
  return out;
}

struct Workspace {
  const ScenarioConfig& config;
  Metric metric;
  JetSpace space;
  JetGeometry geo;
  std::vector<JetPoint> points;
  Tolerance tolerance;

  explicit Workspace(const ScenarioConfig& c)
      : config(c),
        metric(c.metric.build()),
        space(),
        geo(metric, space),
        points(sample_jets(space, c.verification.samples, c.verification.seed)),
        tolerance(c.verification.tolerance()) {}

  ResidualReport residuals(std::span<const LabelledExpr> exprs) const {
    return evaluate_residuals(space, exprs, points, tolerance);
  }
};

}  // namespace

Report check_metric(const ScenarioConfig& config, const fs::path& out) {
  const Workspace ws(config);
  Report report;
  spdlog::info("check-metric: {} at {} points", ws.metric.name(), ws.points.size());
  report.add("christoffel-identity", ws.residuals(christoffel_identity_residuals(ws.geo)));
  report.add("riemann-identities", ws.residuals(riemann_residuals(ws.geo)));

  std::ofstream csv = open_output(out / "curvature.csv");
  csv << "point,x0,x1,K\r\n";
  std::size_t bad_signature = 0;
  std::size_t first_bad = 0;
  for (std::size_t p = 0; p < ws.points.size(); ++p) {
    const std::array<double, 2> x{ws.points[p](0, 0), ws.points[p](1, 0)};
    const PointGeometry at = ws.metric.at(x);
    csv << p << ',' << format_double(x[0]) << ',' << format_double(x[1]) << ',' << format_double(at.curvature)
        << "\r\n";
    try {
      ws.metric.check_signature(x);
    } catch (const GeometryError& e) {
      if (bad_signature++ == 0) first_bad = p;
      spdlog::debug("point {}: {}", p, e.what());
    }
  }
  report.add({"signature", bad_signature ? "point " + std::to_string(first_bad) : "all",
              static_cast<double>(bad_signature), 0.0});
  return report;
}

Report verify_operators(const ScenarioConfig& config, const fs::path& out) {
  (void)out;
  const Workspace ws(config);
  Report report;
  const JetSpace& space = ws.space;
  for (const Lagrangian& lagrangian : corpus(ws.metric, config.m)) {
    const std::string name = lagrangian.name();
    spdlog::info("verify-operators: {}", name);
    const Expr jet = to_jet(ws.geo, lagrangian.expr());
    report.add("exterior-d-squared/" + name, ws.residuals(components(exterior_d1(space, exterior_d(space, jet)))));
    report.add("total-derivative-commutes/" + name,
               ws.residuals(form_difference(exterior_d(space, space.total_derivative(jet)),
                                            total_derivative(space, exterior_d(space, jet)))));
    report.add("momenta-relation-flat/" + name, ws.residuals(momenta_relation_flat(space, jet)));
    report.add("momenta-relation-covariant/" + name, ws.residuals(momenta_relation_covariant(lagrangian, ws.geo)));
    const HamiltonForms h = hamilton(space, jet);
    const LabelledExpr hamilton_diff[] = {{"H", h.by_momenta - h.by_fields}};
    report.add("hamilton-forms/" + name, ws.residuals(hamilton_diff));
  }

  const CommutatorResult commutator = commutator_check(ws.geo, ws.points, RiemannConvention::pinned, ws.tolerance);
  report.add("commutator-curvature", commutator.curvature);
  report.add("commutator-first-order", commutator.first_order);

  const auto cancellation = curvature_cancellation(ws.geo);
  const LabelledExpr cancel[] = {{"l0", cancellation[0]}, {"l1", cancellation[1]}};
  report.add("curvature-cancellation", ws.residuals(cancel));

  // Spin rewrite on covariant states with u and w well apart from parallel.
  SampleRng rng(config.verification.seed);
  ReportRow spin{"spin-rewrite", "all", 0.0, ws.tolerance.atol};
  double worst_ratio = -1.0;
  std::size_t accepted = 0;
  for (std::size_t attempt = 0; accepted < config.verification.samples && attempt < 100 * config.verification.samples;
       ++attempt) {
    const JetPoint& p = ws.points[attempt % ws.points.size()];
    const CurveJet state{{p(0, 0), p(1, 0)}, {{rng.component(), rng.component()}}, {{rng.component(), rng.component()}},
                        std::nullopt};
    const PointGeometry at = ws.metric.at(state.x);
    if (std::fabs(at.dot(state.u, state.u)) < 0.1 || std::fabs(wedge_norm(state.u, state.w, at)) < 1e-3) continue;
    const Covector a = spin_force(state, at);
    const double scale = std::max(std::fabs(a[0]), std::fabs(a[1]));
    const double residual = spin_rewrite_residual(state, at);
    const double allowed = ws.tolerance.atol + ws.tolerance.rtol * scale;
    const double ratio = residual / allowed;
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      spin = {"spin-rewrite", "point " + std::to_string(accepted), residual, allowed};
    }
    ++accepted;
  }
  report.add(spin);
  return report;
}

Report verify_variational(const ScenarioConfig& config, const fs::path& out) {
  (void)out;
  const Workspace ws(config);
  Report report;
  const JetSpace& space = ws.space;
  for (const Lagrangian& lagrangian : corpus(ws.metric, config.m)) {
    const std::string name = lagrangian.name();
    spdlog::info("verify-variational: {}", name);
    const Expr jet = to_jet(ws.geo, lagrangian.expr());
    const Form1 delta = lagrange_derivative(space, jet);
    report.add("delta-squared/" + name, ws.residuals(components(lagrange_derivative1(space, delta))));
    const auto eps = euler_poisson_covariant(lagrangian, ws.geo);
    const LabelledExpr sum[] = {{"l0", eps[0] + delta.coeff(0, 0)}, {"l1", eps[1] + delta.coeff(1, 0)}};
    report.add("euler-poisson-vs-delta/" + name, ws.residuals(sum));
  }

  const Metric flat = Metric::builtin("flat");
  const JetGeometry flat_geo(flat, space);
  const std::string m_label = "m=" + short_number(config.m);
  const Form1 source = geodesic_circle_source_form(space, config.m);
  report.add("source-form-variational/" + m_label, variationality_check(space, source, ws.points, ws.tolerance).report);
  const Form1 from_lagrangian =
      lagrange_derivative(space, to_jet(flat_geo, Lagrangian::geodesic_circle(flat, config.m).expr()));
  report.add("source-form-from-lagrangian/" + m_label, ws.residuals(form_difference(from_lagrangian, source)));

  const Expr norm = to_jet(ws.geo, Lagrangian::norm(ws.metric, config.m).expr());
  const Expr k = to_jet(ws.geo, Lagrangian::curvature(ws.metric).expr());
  const ResidualPair zermelo = zermelo_check(space, norm, ws.points, ws.tolerance);
  report.add("zermelo/homogeneity", zermelo.first);
  report.add("zermelo/second-field", zermelo.second);
  const ResidualPair independence = param_independence_check(space, k, ws.points, ws.tolerance);
  report.add("parameter-independence/first-field", independence.first);
  report.add("parameter-independence/second-field", independence.second);

  if (config.verification.corrupt_source) {
    Form1 corrupted(space);
    corrupted.set(0, 0, space.symbol(0, 3));
    corrupted.set(1, 0, space.symbol(1, 3));
    spdlog::warn("corrupted source form E_i = u_ddot_i requested; its check is expected to fail");
    report.add("variationality/corrupted-source",
               variationality_check(space, corrupted, ws.points, ws.tolerance).report);
  }
  return report;
}

Report integrate_trajectories(const ScenarioConfig& config, const fs::path& out) {
  if (config.integration.initial.empty())
    throw ConfigError("integration.initial", "at least one initial state is required");
  const Metric metric = config.metric.build();
  std::vector<CurveJet> starts;
  for (const InitialState& s : config.integration.initial) starts.push_back(s.jet());
  spdlog::info("integrate: {} trajectories on {} ({}, {})", starts.size(), metric.name(),
               to_string(config.integration.integrator.formulation), to_string(config.integration.integrator.method));
  const std::vector<Trajectory> runs = integrate_batch_parallel(metric, starts, config.integration.integrator);

  Report report;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Trajectory& t = runs[i];
    const std::string prefix = "trajectory-" + std::to_string(i);
    std::ofstream csv = open_output(out / (prefix + ".csv"));
    write_trajectory_csv(csv, t.samples);

    const TrajectorySample& first = t.samples.front();
    const TrajectorySample& last = t.samples.back();
    auto at_t = [](double time) { return "t " + format_double(time); };
    report.add({prefix + "/complete", at_t(last.t), t.complete() ? 0.0 : 1.0, 0.0});
    if (t.error) spdlog::error("{}: stopped early: {}", prefix, *t.error);

    auto worst = [&](const std::string& check, double tolerance, const std::function<double(const TrajectorySample&)>& f) {
      ReportRow row{prefix + "/" + check, at_t(first.t), 0.0, tolerance};
      for (const TrajectorySample& s : t.samples) {
        const double v = f(s);
        if (v > row.residual) {
          row.residual = v;
          row.location = at_t(s.t);
        }
      }
      report.add(row);
    };
    worst("k-drift", config.integration.drift_tolerance,
          [&](const TrajectorySample& s) { return std::fabs(s.curvature - first.curvature); });
    worst("hamilton", config.integration.hamilton_tolerance,
          [](const TrajectorySample& s) { return std::fabs(s.hamilton + s.curvature); });

    const PointGeometry at0 = metric.at(first.x);
    const bool natural = std::fabs(first.speed - 1.0) < 1e-12 && std::fabs(at0.dot(first.u, first.w)) < 1e-12;
    if (natural && config.integration.integrator.formulation == Formulation::concircular)
      worst("speed-drift", config.integration.drift_tolerance,
            [&](const TrajectorySample& s) { return std::fabs(s.speed - first.speed); });
    if (config.integration.expect_closed)
      report.add({prefix + "/closure", at_t(last.t), std::hypot(last.x[0] - first.x[0], last.x[1] - first.x[1]),
                  config.integration.closure_tolerance});
  }
  return report;
}

Report convergence(const ScenarioConfig& config, const fs::path& out) {
  if (config.integration.initial.empty())
    throw ConfigError("integration.initial", "at least one initial state is required");
  const Metric metric = config.metric.build();
  spdlog::info("convergence: {} step sizes", config.convergence.steps.size());
  const ConvergenceResult r = convergence_probe(metric, config.integration.initial.front().jet(),
                                                config.integration.integrator, config.convergence.steps);
  std::ofstream csv = open_output(out / "convergence.csv");
  csv << "h,error,difference,order\r\n";
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    csv << format_double(r.steps[i]) << ',' << format_double(r.errors[i]) << ','
        << (i < r.differences.size() ? format_double(r.differences[i]) : "") << ','
        << (i < r.orders.size() ? format_double(r.orders[i]) : "") << "\r\n";
  }
  Report report;
  report.add({"convergence/monotone", "h " + format_double(r.steps.back()), r.conclusive ? 0.0 : 1.0, 0.0});
  report.add({"convergence/observed-order", "order " + format_double(r.observed_order),
              std::fabs(r.observed_order - config.convergence.expected_order), config.convergence.order_tolerance});
  return report;
}

namespace {

void setup_logging() {
  auto logger = spdlog::get("concircle");
  if (!logger) logger = spdlog::stderr_color_mt("concircle");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("CONCIRCLE_LOG");
  const std::string level = env ? env : "warn";
  static const std::map<std::string, spdlog::level::level_enum> levels = {
      {"error", spdlog::level::err}, {"warn", spdlog::level::warn}, {"info", spdlog::level::info},
      {"debug", spdlog::level::debug}};
  const auto it = levels.find(level);
  spdlog::set_level(it == levels.end() ? spdlog::level::warn : it->second);
  if (it == levels.end()) spdlog::warn("CONCIRCLE_LOG='{}' not one of error, warn, info, debug; using warn", level);
}

void print_report(const std::string& command, const Report& report) {
  for (const ReportRow& r : report.sorted())
    std::cout << (r.passed() ? "pass " : "FAIL ") << r.check << " [" << r.location << "] residual "
              << format_double(r.residual) << " tolerance " << format_double(r.tolerance) << '\n';
  std::cout << command << ": " << (report.passed() ? "all checks passed" : std::to_string(report.failures()) + " failed")
            << '\n';
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Third-order variational mechanics of geodesic circles on 2-manifolds", "concircle"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string format = "csv";
  auto* seed_opt = app.add_option("--seed", seed, "verification seed (default 42)");
  app.add_option("--config", config_path, "scenario TOML file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"csv"}));

  using Command = Report (*)(const ScenarioConfig&, const fs::path&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"check-metric", "Christoffel and Riemann identities, Gaussian curvature table", check_metric},
      {"verify-operators", "jet-calculus, momenta, commutator and spin identities", verify_operators},
      {"verify-variational", "Lagrange-derivative and variationality checks", verify_variational},
      {"integrate", "integrate trajectories and report conservation", integrate_trajectories},
      {"convergence", "observed order of the rk4 integrator", convergence},
  };
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitPass : kExitConfigError;
  }
  setup_logging();

  std::string command;
  Command fn = nullptr;
  for (const auto& [name, help, f] : commands)
    if (app.got_subcommand(name)) {
      command = name;
      fn = f;
    }

  ScenarioConfig config;
  try {
    config = config_path.empty() ? parse_config("", "defaults") : load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }
  if (seed_opt->count() > 0) config.verification.seed = seed;
  if (!out_dir.empty()) config.output.dir = out_dir;
  config.output.format = format;

  const fs::path out(config.output.dir);
  try {
    fs::create_directories(out);
    std::ofstream effective = open_output(out / "effective-config.toml");
    effective << to_toml(config);
    const Report report = fn(config, out);
    std::ofstream csv = open_output(out / (command + "-report.csv"));
    report.write_csv(csv);
    print_report(command, report);
    return report.passed() ? kExitPass : kExitCheckFailed;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "computation error: " << e.what() << '\n';
    return kExitComputeError;
  }
}

}  // namespace concircle::cli
