#pragma once

// Geodesic-circle trajectories as a first-order system in (x, u, w):
//   x_dot = u,  u_dot = w - Gamma(u, u),  w_dot = w' - Gamma(u, w),
// with w' from geodesic_circle_accel(). No projection is applied; the
// diagnostics report drift as it is.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "concircle/mechanics.hpp"

namespace concircle {

enum class Method { rk4, rkf45 };
std::string_view to_string(Method method);
/// "rk4" or "rkf45"; throws std::invalid_argument otherwise.
Method parse_method(std::string_view name);
Formulation parse_formulation(std::string_view name);

struct IntegratorConfig {
  Method method = Method::rk4;
  /// Fixed step for rk4, initial step for rkf45.
  double step = 1e-3;
  double atol = 1e-10;
  double rtol = 1e-10;
  /// rkf45 gives up below this step.
  double min_step = 1e-12;
  double t_start = 0.0;
  double t_end = 10.0;
  /// Keep every stride-th step; the first and last states are always kept.
  int stride = 1;
  Formulation formulation = Formulation::concircular;
  double m = 1.0;

  /// Throws std::invalid_argument on a bad field.
  void validate() const;
};

struct TrajectorySample {
  double t = 0.0;
  std::array<double, 2> x{};
  Vector u;
  Vector w;
  double speed = 0.0;
  double curvature = 0.0;
  double hamilton = 0.0;
  double s01 = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  /// Set when a guard stopped the run; samples then hold the part before it.
  std::optional<std::string> error;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  bool complete() const noexcept { return !error; }
};

class Integrator {
 public:
  Integrator(Metric metric, IntegratorConfig config);

  const Metric& metric() const noexcept { return metric_; }
  const IntegratorConfig& config() const noexcept { return config_; }

  /// Throws GeometryError if the initial state fails the guards.
  Trajectory run(const CurveJet& initial) const;

  /// Diagnostics of one state. H is evaluated from the momenta of
  /// L = k - m ||u|| on the jet, independently of k.
  TrajectorySample sample(double t, const CurveJet& state) const;

 private:
  struct Derivative {
    Vector x;
    Vector u;
    Vector w;
  };
  Derivative rhs(const CurveJet& s) const;
  void run_rk4(CurveJet state, Trajectory& out) const;
  void run_rkf45(CurveJet state, Trajectory& out) const;

  Metric metric_;
  IntegratorConfig config_;
  JetSpace space_;
  HamiltonFunction hamilton_;
};

Trajectory integrate(const Metric& metric, const CurveJet& initial, const IntegratorConfig& config);

/// Unit-speed state at x with heading angle measured from the first
/// orthonormal frame vector and w = curvature * (*u), so that k(0) = curvature
/// and g(u, w) = 0. Riemannian metrics only.
CurveJet natural_initial_state(const Metric& metric, const std::array<double, 2>& x, double heading,
                               double curvature);

/// One trajectory per initial state. The parallel version distributes whole
/// trajectories over threads and returns the same results as the serial one.
std::vector<Trajectory> integrate_batch_serial(const Metric& metric, std::span<const CurveJet> initial,
                                               const IntegratorConfig& config);
std::vector<Trajectory> integrate_batch_parallel(const Metric& metric, std::span<const CurveJet> initial,
                                                 const IntegratorConfig& config);

/// Max-norm distance between two samples' (x, u, w).
double state_distance(const TrajectorySample& a, const TrajectorySample& b);

struct ConvergenceResult {
  std::vector<double> steps;        // descending
  std::vector<double> errors;       // endpoint distance to the finest run
  std::vector<double> differences;  // endpoint distance between consecutive runs
  std::vector<double> orders;       // log(d_i / d_{i+1}) / log(h_i / h_{i+1})
  double observed_order = 0.0;
  bool conclusive = false;
  std::string note;
};

/// Runs the scenario once per step size (rk4) and estimates the order.
ConvergenceResult convergence_probe(const Metric& metric, const CurveJet& initial, IntegratorConfig config,
                                    std::span<const double> steps);

}  // namespace concircle
