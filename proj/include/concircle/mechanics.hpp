#pragma once

// Second-order variational mechanics on a 2-manifold.
//
// Lagrangians are written in covariant coordinates: expressions in x0, x1
// (position), u0, u1 (velocity) and w0, w1 (covariant acceleration
// w = u_dot + Gamma(u, u)). to_jet() rewrites them over the jet variables so
// the jet calculus applies unchanged.
//
// Sign conventions: euler_poisson_covariant() returns LHS - RHS of the
// covariant Euler-Poisson equation, which equals -delta(L) in every chart.
// The curvature Lagrangian k uses the area element of geometry.hpp, so a
// clockwise flat circle has k < 0.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "concircle/geometry.hpp"
#include "concircle/jet.hpp"

namespace concircle {

class Lagrangian {
 public:
  Lagrangian(std::string name, Expr covariant, double m = 0.0);

  /// 1/2 g(u, u).
  static Lagrangian kinetic(const Metric& metric);
  /// -m sqrt|g(u, u)|.
  static Lagrangian norm(const Metric& metric, double m);
  /// Frenet curvature ||u ^ w|| / ||u||^3.
  static Lagrangian curvature(const Metric& metric);
  /// k - m ||u||.
  static Lagrangian geodesic_circle(const Metric& metric, double m);

  const std::string& name() const noexcept { return name_; }
  const Expr& expr() const noexcept { return expr_; }
  double m() const noexcept { return m_; }

 private:
  std::string name_;
  Expr expr_;
  double m_;
};

/// Covariant coordinate symbols x{i}, u{i}, w{i}.
Expr covariant_symbol(char kind, int index);

/// Rewrites a covariant expression over jet variables (w via the connection).
Expr to_jet(const JetGeometry& geo, const Expr& covariant);

enum class Frame { flat, covariant };

template <class T>
struct MomentumPair {
  std::array<T, 2> p1;  // conjugate to the acceleration
  std::array<T, 2> p;   // conjugate to the velocity
};

using SymbolicMomenta = MomentumPair<Expr>;

struct Momenta {
  Covector p1;
  Covector p;
  Frame frame = Frame::flat;
};

/// p1_i = dL/d(x_2^i), p_i = dL/d(x_1^i) - d_T p1_i for a jet-coordinate L.
SymbolicMomenta momenta_flat(const JetSpace& space, const Expr& jet_lagrangian);
/// pi1_i = dL/dw^i, pi_i = dL/du^i - (pi1)'_i, written over jet variables.
SymbolicMomenta momenta_covariant(const Lagrangian& lagrangian, const JetGeometry& geo);
Momenta evaluate(const JetSpace& space, const SymbolicMomenta& momenta, const JetPoint& point, Frame frame);

/// p1 du + p dx - (i_1 dL - 1/2 d_T i_2 dL), per jet covector.
std::vector<LabelledExpr> momenta_relation_flat(const JetSpace& space, const Expr& jet_lagrangian);
/// pi1(Du) + pi(dx) - (i_1 dL - 1/2 (i_2 dL)'), per jet covector.
std::vector<LabelledExpr> momenta_relation_covariant(const Lagrangian& lagrangian, const JetGeometry& geo);

struct HamiltonForms {
  Expr by_momenta;  // p1 a + p u - L
  Expr by_fields;   // zeta1 L - d_T zeta2 L - L
};
HamiltonForms hamilton(const JetSpace& space, const Expr& jet_lagrangian);

/// Both forms evaluated; throws std::logic_error if they disagree beyond
/// 1e-10 relative to the magnitude of the summed terms.
double hamilton_value(const JetSpace& space, const HamiltonForms& h, const JetPoint& point);

/// Both forms compiled once, for repeated evaluation with the same cross-check.
class HamiltonFunction {
 public:
  HamiltonFunction(const JetSpace& space, const HamiltonForms& h);
  double operator()(const JetPoint& point) const;

 private:
  Program program_;
};

/// Residual covector of the covariant Euler-Poisson equation over jet variables.
std::array<Expr, 2> euler_poisson_covariant(const Lagrangian& lagrangian, const JetGeometry& geo);

/// dk/dx^l - dk/du^i Gamma^i_{lj} u^j - dk/dw^i Gamma^i_{lj} w^j, which vanishes for k.
std::array<Expr, 2> curvature_cancellation(const JetGeometry& geo);

/// Flat-space source form e_ij a'^j / |u|^3 - 3 (a.u) e_ij a^j / |u|^5 + m (|u|^2 a_i - (a.u) u_i) / |u|^3,
/// with a = x_2 and a' = x_3.
Form1 geodesic_circle_source_form(const JetSpace& space, double m);

enum class Formulation { concircular, euler_poisson };
std::string_view to_string(Formulation f);

struct SolveInfo {
  double determinant = 0.0;
  double condition = 0.0;
};

/// The covariant third derivative w' for state (x, u, w).
/// concircular: w' = -g(w, w) u. euler_poisson: the unique w' solving the
/// equation of L = k - m ||u|| (m > 0 required).
Vector geodesic_circle_accel(const CurveJet& state, const PointGeometry& at, Formulation formulation, double m,
                             SolveInfo* info = nullptr);

/// Coordinate jet (x, u, u_dot, u_ddot) of a covariant curve state; the third
/// order is filled only when state.w_prime is set.
JetPoint curve_to_jet(const JetSpace& space, const CurveJet& state, const PointGeometry& at);

struct SpinTensor {
  /// s[q][i] = u^q w^i - u^i w^q.
  Matrix2 s{};
  double s01() const { return s[0][1]; }
};

SpinTensor spin_tensor(const Vector& u, const Vector& w);
/// pi1_i R_{ljq}^i u^j u^q with pi1 the acceleration momentum of k.
Covector spin_force(const CurveJet& state, const PointGeometry& at);
/// The same force written through the spin tensor and ||u ^ w||; throws
/// GeometryError when ||u ^ w|| is negligible.
Covector spin_force_rewritten(const CurveJet& state, const PointGeometry& at);
/// Largest component of spin_force - spin_force_rewritten.
double spin_rewrite_residual(const CurveJet& state, const PointGeometry& at);

}  // namespace concircle
