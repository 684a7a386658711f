#pragma once

// Metric geometry of a 2-manifold: Levi-Civita connection, curvature, area
// element and the Frenet curvature of curves.
//
// Index conventions used throughout:
//   christoffel(i, l, j)      = Gamma^i_{lj}
//   riemann(l, j, q, i)       = R_{ljq}^i
//       = d_j Gamma^i_{lq} - d_l Gamma^i_{jq} + Gamma^i_{jm} Gamma^m_{lq} - Gamma^i_{lm} Gamma^m_{jq}
//   riemann_lowered(l,j,q,i)  = g_{im} R_{ljq}^m,  K = R_{0101} / det g
// With this sign the commutator of covariant derivatives along a curve reads
// (Du)' = D(u') + R_{ljq}^i u^j u^q dx^l; the opposite sign is kept as
// riemann_candidate() so the check can show it fails.
//
// Area element: e_{ij} = s sqrt|det g| eps_{ij}, eps_{01} = 1, s the
// orientation. (*v)_k = v^j e_{jk}, so ||a ^ b|| = (*a)_k b^k.

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "concircle/expr.hpp"
#include "concircle/jet.hpp"

namespace concircle {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Signature { riemannian, lorentzian };
std::string_view to_string(Signature s);

template <class Tag>
struct Components {
  std::array<double, 2> c{};

  double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }

  friend Components operator+(Components a, const Components& b) { return {{a.c[0] + b.c[0], a.c[1] + b.c[1]}}; }
  friend Components operator-(Components a, const Components& b) { return {{a.c[0] - b.c[0], a.c[1] - b.c[1]}}; }
  friend Components operator*(double s, Components a) { return {{s * a.c[0], s * a.c[1]}}; }
  friend bool operator==(const Components&, const Components&) = default;
};

struct VectorTag {};
struct CovectorTag {};
using Vector = Components<VectorTag>;
using Covector = Components<CovectorTag>;

inline double contract(const Covector& s, const Vector& v) { return s[0] * v[0] + s[1] * v[1]; }

using Matrix2 = std::array<std::array<double, 2>, 2>;
using Tensor3 = std::array<Matrix2, 2>;
using Tensor4 = std::array<Tensor3, 2>;

/// Numeric geometry at one base point.
struct PointGeometry {
  std::array<double, 2> x{};
  Matrix2 g{};
  Matrix2 inverse{};
  double det = 0.0;
  Tensor3 gamma{};         // [i][l][j]
  Tensor4 gamma_partial{}; // [i][l][j][m] = d_m Gamma^i_{lj}
  Tensor4 riemann{};       // [l][j][q][i] = R_{ljq}^i
  double curvature = 0.0;
  Signature signature = Signature::riemannian;
  int orientation = 1;

  double dot(const Vector& a, const Vector& b) const;
  Covector lower(const Vector& v) const;
  Vector raise(const Covector& s) const;
  /// Gamma^i_{lj} a^l b^j.
  Vector gamma_contract(const Vector& a, const Vector& b) const;
  /// s sqrt|det g|, the factor in e_{01}.
  double area_factor() const;
};

class Metric {
 public:
  /// Components g00, g01, g11 as expressions in x0, x1.
  Metric(std::string name, const std::array<Expr, 3>& components, Signature signature, int orientation = 1);

  /// "flat", "polar-flat", "sphere", "sphere(r)", "hyperbolic", "lorentz-flat".
  static Metric builtin(std::string_view spec, int orientation = 1);
  /// Parses explicit component strings; only x0 and x1 may appear.
  static Metric parse(std::string name, std::string_view g00, std::string_view g01, std::string_view g11,
                      Signature signature, int orientation = 1);

  const std::string& name() const noexcept;
  Signature signature() const noexcept;
  int orientation() const noexcept;

  const Expr& g(int i, int j) const;
  const Expr& inverse(int i, int j) const;
  const Expr& det() const;
  const Expr& christoffel(int i, int l, int j) const;
  const Expr& christoffel_partial(int i, int l, int j, int m) const;
  const Expr& riemann(int l, int j, int q, int i) const;
  Expr riemann_candidate(int l, int j, int q, int i) const { return -riemann(l, j, q, i); }
  const Expr& riemann_lowered(int l, int j, int q, int i) const;
  const Expr& gaussian_curvature() const;

  /// Throws GeometryError when |det g| <= 1e-12 * scale.
  PointGeometry at(const std::array<double, 2>& x) const;
  /// Throws GeometryError unless the eigenvalue signs at x match signature().
  void check_signature(const std::array<double, 2>& x) const;

 private:
  struct Fields;
  std::shared_ptr<const Fields> fields_;
};

/// Euclidean wedge of the components scaled by the area element.
double wedge_norm(const Vector& a, const Vector& b, const PointGeometry& at);
Covector hodge_star_covector(const Vector& v, const PointGeometry& at);
Vector hodge_star(const Vector& v, const PointGeometry& at);
/// g(a,v) g(b,w) - g(a,w) g(b,v), the induced product of bivectors.
double bivector_dot(const Vector& a, const Vector& b, const Vector& v, const Vector& w, const PointGeometry& at);
/// sqrt|g(v,v)|; throws GeometryError below the velocity floor or on null vectors.
double checked_norm(const Vector& v, const PointGeometry& at, double floor = 1e-9);

struct CurveJet {
  std::array<double, 2> x{};
  Vector u;
  Vector w;
  std::optional<Vector> w_prime;
};

/// k = ||u ^ w|| / ||u||^3.
double frenet_curvature(const CurveJet& jet, const PointGeometry& at);
double frenet_curvature(const CurveJet& jet, const Metric& metric);

/// xi' = xi_dot + Gamma(u, xi) for a vector field along the curve.
Vector covariant_prime(const Vector& xi, const Vector& xi_dot, const Vector& u, const PointGeometry& at);
/// s'_i = s_dot_i - Gamma^l_{ji} u^j s_l.
Covector covariant_prime(const Covector& s, const Covector& s_dot, const Vector& u, const PointGeometry& at);

enum class RiemannConvention { pinned, candidate };

/// Metric fields rewritten over the jet coordinates, with u = x_1 and
/// w = x_2 + Gamma(u, u) as the covariant acceleration.
class JetGeometry {
 public:
  JetGeometry(Metric metric, JetSpace space);

  const Metric& metric() const noexcept { return metric_; }
  const JetSpace& space() const noexcept { return space_; }

  const Expr& g(int i, int j) const { return g_[static_cast<std::size_t>(i * 2 + j)]; }
  const Expr& inverse(int i, int j) const { return inverse_[static_cast<std::size_t>(i * 2 + j)]; }
  const Expr& christoffel(int i, int l, int j) const { return gamma_[static_cast<std::size_t>((i * 2 + l) * 2 + j)]; }
  const Expr& riemann(int l, int j, int q, int i) const {
    return riemann_[static_cast<std::size_t>(((l * 2 + j) * 2 + q) * 2 + i)];
  }
  const Expr& riemann_lowered(int l, int j, int q, int i) const {
    return riemann_lowered_[static_cast<std::size_t>(((l * 2 + j) * 2 + q) * 2 + i)];
  }
  const Expr& gaussian_curvature() const { return curvature_; }
  /// s sqrt|det g| in jet coordinates.
  const Expr& area_factor() const { return area_; }

  Expr u(int i) const { return space_.symbol(i, 1); }
  const Expr& w(int i) const { return w_[static_cast<std::size_t>(i)]; }
  const Expr& w_prime(int i) const { return w_prime_[static_cast<std::size_t>(i)]; }

  std::array<Expr, 2> covariant_prime_vector(const std::array<Expr, 2>& xi) const;
  std::array<Expr, 2> covariant_prime_covector(const std::array<Expr, 2>& sigma) const;

 private:
  Metric metric_;
  JetSpace space_;
  std::array<Expr, 4> g_;
  std::array<Expr, 4> inverse_;
  std::array<Expr, 8> gamma_;
  std::array<Expr, 16> riemann_;
  std::array<Expr, 16> riemann_lowered_;
  Expr curvature_;
  Expr area_;
  std::array<Expr, 2> w_;
  std::array<Expr, 2> w_prime_;
};

/// g_{jl} Gamma^l_{qi} + g_{il} Gamma^l_{qj} - d_q g_{ij}, one per (i, j, q).
std::vector<LabelledExpr> christoffel_identity_residuals(const JetGeometry& geo);
/// R_{ljqi} - K (g_{lq} g_{ji} - g_{li} g_{jq}) and R_{ljq}^i + R_{jlq}^i.
std::vector<LabelledExpr> riemann_residuals(const JetGeometry& geo);
/// (Du)'^i - D(u')^i - R_{ljq}^i u^j u^q dx^l, coefficients over all jet covectors.
std::vector<LabelledExpr> commutator_residuals(const JetGeometry& geo,
                                               RiemannConvention convention = RiemannConvention::pinned);
/// (dx)'^i - (Du)^i.
std::vector<LabelledExpr> first_order_commutator_residuals(const JetGeometry& geo);

struct CommutatorResult {
  ResidualReport curvature;
  ResidualReport first_order;
  bool passed() const { return curvature.passed() && first_order.passed(); }
};
CommutatorResult commutator_check(const JetGeometry& geo, std::span<const JetPoint> samples,
                                  RiemannConvention convention = RiemannConvention::pinned,
                                  Tolerance tolerance = {});

}  // namespace concircle
