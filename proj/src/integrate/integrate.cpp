#include "concircle/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace concircle {

std::string_view to_string(Method method) { return method == Method::rk4 ? "rk4" : "rkf45"; }

Method parse_method(std::string_view name) {
  if (name == "rk4") return Method::rk4;
  if (name == "rkf45") return Method::rkf45;
  throw std::invalid_argument("unknown method '" + std::string(name) + "' (rk4, rkf45)");
}

Formulation parse_formulation(std::string_view name) {
  if (name == "concircular") return Formulation::concircular;
  if (name == "euler_poisson") return Formulation::euler_poisson;
  throw std::invalid_argument("unknown formulation '" + std::string(name) + "' (concircular, euler_poisson)");
}

void IntegratorConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(std::isfinite(step) && step > 0.0, "step must be positive");
  require(std::isfinite(t_start) && std::isfinite(t_end), "t_span must be finite");
  require(t_end > t_start, "t_end must exceed t_start");
  require(std::isfinite(atol) && atol > 0.0, "atol must be positive");
  require(std::isfinite(rtol) && rtol > 0.0, "rtol must be positive");
  require(std::isfinite(min_step) && min_step > 0.0, "min_step must be positive");
  require(stride >= 1, "stride must be at least 1");
  require(std::isfinite(m) && m >= 0.0, "m must be finite and non-negative");
  require(formulation != Formulation::euler_poisson || m > 0.0, "the euler_poisson formulation needs m > 0");
}

namespace {

IntegratorConfig validated(IntegratorConfig config) {
  config.validate();
  return config;
}

HamiltonFunction make_hamilton(const Metric& metric, const JetSpace& space, double m) {
  const JetGeometry geo(metric, space);
  return {space, hamilton(space, to_jet(geo, Lagrangian::geodesic_circle(metric, m).expr()))};
}

CurveJet axpy(const CurveJet& s, double h, const Vector& dx, const Vector& du, const Vector& dw) {
  CurveJet r;
  r.x = {s.x[0] + h * dx[0], s.x[1] + h * dx[1]};
  r.u = s.u + h * du;
  r.w = s.w + h * dw;
  return r;
}

bool finite(const CurveJet& s) {
  for (double v : {s.x[0], s.x[1], s.u[0], s.u[1], s.w[0], s.w[1]})
    if (!std::isfinite(v)) return false;
  return true;
}

// Runs fn; guard failures become the trajectory's error.
bool guarded(Trajectory& out, double t, const std::function<void()>& fn) {
  try {
    fn();
    return true;
  } catch (const GeometryError& e) {
    out.error = "t = " + std::to_string(t) + ": " + e.what();
  } catch (const EvalError& e) {
    out.error = "t = " + std::to_string(t) + ": " + e.what();
  }
  return false;
}

}  // namespace

Integrator::Integrator(Metric metric, IntegratorConfig config)
    : metric_(std::move(metric)),
      config_(validated(config)),
      space_(),
      hamilton_(make_hamilton(metric_, space_, config_.m)) {}

Integrator::Derivative Integrator::rhs(const CurveJet& s) const {
  if (!finite(s)) throw GeometryError("non-finite state");
  const PointGeometry at = metric_.at(s.x);
  const Vector w_prime = geodesic_circle_accel(s, at, config_.formulation, config_.m);
  return {s.u, s.w - at.gamma_contract(s.u, s.u), w_prime - at.gamma_contract(s.u, s.w)};
}

TrajectorySample Integrator::sample(double t, const CurveJet& state) const {
  const PointGeometry at = metric_.at(state.x);
  CurveJet full = state;
  full.w_prime = geodesic_circle_accel(state, at, config_.formulation, config_.m);
  TrajectorySample s;
  s.t = t;
  s.x = state.x;
  s.u = state.u;
  s.w = state.w;
  s.speed = checked_norm(state.u, at);
  s.curvature = frenet_curvature(state, at);
  s.hamilton = hamilton_(curve_to_jet(space_, full, at));
  s.s01 = spin_tensor(state.u, state.w).s01();
  return s;
}

Trajectory Integrator::run(const CurveJet& initial) const {
  Trajectory out;
  out.samples.push_back(sample(config_.t_start, initial));
  CurveJet state = initial;
  state.w_prime.reset();
  if (config_.method == Method::rk4)
    run_rk4(state, out);
  else
    run_rkf45(state, out);
  return out;
}

void Integrator::run_rk4(CurveJet state, Trajectory& out) const {
  const double span = config_.t_end - config_.t_start;
  const auto steps = static_cast<std::size_t>(std::ceil(span / config_.step - 1e-9));
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t0 = config_.t_start + static_cast<double>(n - 1) * config_.step;
    const double t1 = n == steps ? config_.t_end : config_.t_start + static_cast<double>(n) * config_.step;
    const double h = t1 - t0;
    CurveJet next;
    const bool ok = guarded(out, t0, [&] {
      const Derivative k1 = rhs(state);
      const Derivative k2 = rhs(axpy(state, h / 2, k1.x, k1.u, k1.w));
      const Derivative k3 = rhs(axpy(state, h / 2, k2.x, k2.u, k2.w));
      const Derivative k4 = rhs(axpy(state, h, k3.x, k3.u, k3.w));
      auto combine = [](const Vector& a, const Vector& b, const Vector& c, const Vector& d) {
        return (1.0 / 6.0) * (a + 2.0 * b + 2.0 * c + d);
      };
      next = axpy(state, h, combine(k1.x, k2.x, k3.x, k4.x), combine(k1.u, k2.u, k3.u, k4.u),
                  combine(k1.w, k2.w, k3.w, k4.w));
      if (!finite(next)) throw GeometryError("non-finite state");
      if (n % static_cast<std::size_t>(config_.stride) == 0 || n == steps) out.samples.push_back(sample(t1, next));
    });
    if (!ok) return;
    state = next;
    ++out.accepted_steps;
  }
}

void Integrator::run_rkf45(CurveJet state, Trajectory& out) const {
  // Fehlberg 4(5) coefficients; the fifth-order solution is propagated.
  static constexpr double a[6][5] = {{},
                                     {1.0 / 4},
                                     {3.0 / 32, 9.0 / 32},
                                     {1932.0 / 2197, -7200.0 / 2197, 7296.0 / 2197},
                                     {439.0 / 216, -8.0, 3680.0 / 513, -845.0 / 4104},
                                     {-8.0 / 27, 2.0, -3544.0 / 2565, 1859.0 / 4104, -11.0 / 40}};
  static constexpr double b5[6] = {16.0 / 135, 0.0, 6656.0 / 12825, 28561.0 / 56430, -9.0 / 50, 2.0 / 55};
  static constexpr double b4[6] = {25.0 / 216, 0.0, 1408.0 / 2565, 2197.0 / 4104, -1.0 / 5, 0.0};

  double t = config_.t_start;
  double h = std::min(config_.step, config_.t_end - t);
  std::size_t accepted = 0;
  while (t < config_.t_end) {
    const bool last = t + h >= config_.t_end;
    if (last) h = config_.t_end - t;
    CurveJet high;
    double err = 0.0;
    const bool ok = guarded(out, t, [&] {
      Derivative k[6];
      for (int s = 0; s < 6; ++s) {
        Vector dx, du, dw;
        for (int j = 0; j < s; ++j) {
          dx = dx + a[s][j] * k[j].x;
          du = du + a[s][j] * k[j].u;
          dw = dw + a[s][j] * k[j].w;
        }
        k[s] = rhs(axpy(state, h, dx, du, dw));
      }
      Vector dx5, du5, dw5, dx4, du4, dw4;
      for (int s = 0; s < 6; ++s) {
        dx5 = dx5 + b5[s] * k[s].x;
        du5 = du5 + b5[s] * k[s].u;
        dw5 = dw5 + b5[s] * k[s].w;
        dx4 = dx4 + b4[s] * k[s].x;
        du4 = du4 + b4[s] * k[s].u;
        dw4 = dw4 + b4[s] * k[s].w;
      }
      high = axpy(state, h, dx5, du5, dw5);
      if (!finite(high)) throw GeometryError("non-finite state");
      const CurveJet low = axpy(state, h, dx4, du4, dw4);
      const double y0[6] = {state.x[0], state.x[1], state.u[0], state.u[1], state.w[0], state.w[1]};
      const double y5[6] = {high.x[0], high.x[1], high.u[0], high.u[1], high.w[0], high.w[1]};
      const double y4[6] = {low.x[0], low.x[1], low.u[0], low.u[1], low.w[0], low.w[1]};
      for (int i = 0; i < 6; ++i) {
        const double sc = config_.atol + config_.rtol * std::max(std::fabs(y0[i]), std::fabs(y5[i]));
        err = std::max(err, std::fabs(y5[i] - y4[i]) / sc);
      }
    });
    if (!ok) return;

    if (err <= 1.0) {
      t = last ? config_.t_end : t + h;
      state = high;
      ++accepted;
      ++out.accepted_steps;
      const bool keep = accepted % static_cast<std::size_t>(config_.stride) == 0 || t >= config_.t_end;
      if (keep && !guarded(out, t, [&] { out.samples.push_back(sample(t, state)); })) return;
    } else {
      ++out.rejected_steps;
    }
    const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
    if (t < config_.t_end && h < config_.min_step) {
      out.error = "t = " + std::to_string(t) + ": step size underflow";
      return;
    }
  }
}

Trajectory integrate(const Metric& metric, const CurveJet& initial, const IntegratorConfig& config) {
  return Integrator(metric, config).run(initial);
}

CurveJet natural_initial_state(const Metric& metric, const std::array<double, 2>& x, double heading,
                               double curvature) {
  if (metric.signature() != Signature::riemannian)
    throw GeometryError("natural initial states need a riemannian metric");
  const PointGeometry at = metric.at(x);
  // Gram-Schmidt on the coordinate basis.
  const Vector e1 = (1.0 / std::sqrt(at.g[0][0])) * Vector{{1.0, 0.0}};
  const Vector rest = Vector{{0.0, 1.0}} - at.dot(Vector{{0.0, 1.0}}, e1) * e1;
  const Vector e2 = (1.0 / std::sqrt(at.dot(rest, rest))) * rest;
  CurveJet s;
  s.x = x;
  s.u = std::cos(heading) * e1 + std::sin(heading) * e2;
  s.w = curvature * hodge_star(s.u, at);
  return s;
}

namespace {

void rethrow_first(const std::vector<std::optional<std::string>>& errors) {
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i]) throw GeometryError("trajectory " + std::to_string(i) + ": " + *errors[i]);
}

void run_one(const Integrator& integrator, const CurveJet& initial, Trajectory& out,
             std::optional<std::string>& error) {
  try {
    out = integrator.run(initial);
  } catch (const std::exception& e) {
    error = e.what();
  }
}

}  // namespace

std::vector<Trajectory> integrate_batch_serial(const Metric& metric, std::span<const CurveJet> initial,
                                               const IntegratorConfig& config) {
  const Integrator integrator(metric, config);
  std::vector<Trajectory> out(initial.size());
  std::vector<std::optional<std::string>> errors(initial.size());
  for (std::size_t i = 0; i < initial.size(); ++i) run_one(integrator, initial[i], out[i], errors[i]);
  rethrow_first(errors);
  return out;
}

std::vector<Trajectory> integrate_batch_parallel(const Metric& metric, std::span<const CurveJet> initial,
                                                 const IntegratorConfig& config) {
  const Integrator integrator(metric, config);
  std::vector<Trajectory> out(initial.size());
  std::vector<std::optional<std::string>> errors(initial.size());
  const auto count = static_cast<std::ptrdiff_t>(initial.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    run_one(integrator, initial[k], out[k], errors[k]);
  }
  rethrow_first(errors);
  return out;
}

double state_distance(const TrajectorySample& a, const TrajectorySample& b) {
  return std::max({std::fabs(a.x[0] - b.x[0]), std::fabs(a.x[1] - b.x[1]), std::fabs(a.u[0] - b.u[0]),
                   std::fabs(a.u[1] - b.u[1]), std::fabs(a.w[0] - b.w[0]), std::fabs(a.w[1] - b.w[1])});
}

ConvergenceResult convergence_probe(const Metric& metric, const CurveJet& initial, IntegratorConfig config,
                                    std::span<const double> steps) {
  if (steps.size() < 3) throw std::invalid_argument("convergence probe needs at least three step sizes");
  ConvergenceResult r;
  r.steps.assign(steps.begin(), steps.end());
  std::sort(r.steps.begin(), r.steps.end(), std::greater<>());
  if (std::adjacent_find(r.steps.begin(), r.steps.end()) != r.steps.end())
    throw std::invalid_argument("convergence probe step sizes must be distinct");

  config.method = Method::rk4;
  std::vector<TrajectorySample> ends;
  for (double h : r.steps) {
    config.step = h;
    config.stride = std::numeric_limits<int>::max();
    const Trajectory t = integrate(metric, initial, config);
    if (!t.complete()) throw GeometryError("convergence probe: h = " + std::to_string(h) + ": " + *t.error);
    ends.push_back(t.samples.back());
  }
  for (std::size_t i = 0; i < ends.size(); ++i) r.errors.push_back(state_distance(ends[i], ends.back()));
  for (std::size_t i = 0; i + 1 < ends.size(); ++i) r.differences.push_back(state_distance(ends[i], ends[i + 1]));
  for (std::size_t i = 0; i + 1 < r.differences.size(); ++i)
    r.orders.push_back(std::log(r.differences[i] / r.differences[i + 1]) / std::log(r.steps[i] / r.steps[i + 1]));

  r.conclusive = true;
  for (std::size_t i = 0; i + 1 < r.differences.size(); ++i)
    if (!(r.differences[i] > r.differences[i + 1])) r.conclusive = false;
  for (std::size_t i = 0; i + 2 < r.errors.size(); ++i)
    if (!(r.errors[i] > r.errors[i + 1])) r.conclusive = false;
  double sum = 0.0;
  for (double p : r.orders) sum += p;
  r.observed_order = sum / static_cast<double>(r.orders.size());
  if (!r.conclusive) r.note = "inconclusive: error sequence is not monotone";
  return r;
}

}  // namespace concircle
