#pragma once

// Exact-signature linear algebra on R^{n+1,1}.
//
// Vectors are coordinate columns in the fixed basis {v0, e_1..e_n, v_inf}
// with (v0, v_inf) = -1, (e_i, e_j) = delta_ij and every other pairing 0.
// Skew endomorphisms (bivectors) and orthogonal maps are stored as dense
// (n+2)x(n+2) matrices acting on those columns.

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>

namespace isothermic {

using LorentzVector = Eigen::VectorXd;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a construction degenerates numerically (null pairs, points at
// infinity, vanishing sections).
class DegeneracyError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

namespace lorentz {

inline constexpr double kNullTolerance = 1e-10;

/// Ambient Euclidean dimension n of a coordinate column (size n+2).
inline int euclidean_dim(const LorentzVector& x) { return static_cast<int>(x.size()) - 2; }

LorentzVector zero(int n);
LorentzVector v0(int n);
LorentzVector vinf(int n);
/// Unit basis vector e_i, 1 <= i <= n.
LorentzVector e(int n, int i);
/// Embeds Euclidean coordinates x in R^n = <v0, v_inf>^perp.
LorentzVector from_euclidean(std::span<const double> x);
LorentzVector from_euclidean(const Eigen::VectorXd& x);
/// Throws GeometryError on NaN/Inf coordinates.
const LorentzVector& require_finite(const LorentzVector& x);

Eigen::MatrixXd gram(int n);

double inner(const LorentzVector& x, const LorentzVector& y);
inline double norm2(const LorentzVector& x) { return inner(x, x); }
bool is_null(const LorentzVector& x, double tol = kNullTolerance);

/// (u ^ v) w = (u, w) v - (v, w) u.
LorentzVector wedge_apply(const LorentzVector& u, const LorentzVector& v, const LorentzVector& w);

}  // namespace lorentz

/// Skew endomorphism of R^{n+1,1}: G^T M + M^T G = 0.
struct Bivector {
  Eigen::MatrixXd m;

  static Bivector zero(int n);
  static Bivector wedge(const LorentzVector& u, const LorentzVector& v);

  int dim() const { return static_cast<int>(m.rows()); }
  LorentzVector apply(const LorentzVector& w) const { return m * w; }
  /// max |G M + M^T G| entry.
  double skew_residual() const;

  Bivector& operator+=(const Bivector& o) { m += o.m; return *this; }
  Bivector& operator-=(const Bivector& o) { m -= o.m; return *this; }
  Bivector& operator*=(double s) { m *= s; return *this; }
  friend Bivector operator+(Bivector a, const Bivector& b) { return a += b; }
  friend Bivector operator-(Bivector a, const Bivector& b) { return a -= b; }
  friend Bivector operator*(double s, Bivector a) { return a *= s; }
  friend Bivector operator*(Bivector a, double s) { return a *= s; }
};

/// [a, b] = ab - ba; skew maps close under the commutator.
Bivector commutator(const Bivector& a, const Bivector& b);

/// Element of O(n+1,1).
struct OrthogonalMap {
  Eigen::MatrixXd m;

  static OrthogonalMap identity(int n);

  int dim() const { return static_cast<int>(m.rows()); }
  LorentzVector apply(const LorentzVector& x) const { return m * x; }
  /// Inverse via the Gram form: M^{-1} = G M^T G.
  OrthogonalMap inverse() const;
  /// max over basis pairs |(M e_i, M e_j) - (e_i, e_j)|.
  double orthogonality_residual() const;
  /// Conjugation Ad(M) b = M b M^{-1}.
  Bivector adjoint(const Bivector& b) const;

  friend OrthogonalMap operator*(const OrthogonalMap& a, const OrthogonalMap& b) { return {a.m * b.m}; }
};

struct SpaceForm {
  LorentzVector w;

  explicit SpaceForm(LorentzVector w_);
  /// Flat space form E(v_inf).
  static SpaceForm flat(int n) { return SpaceForm(lorentz::vinf(n)); }

  int euclidean_dim() const { return lorentz::euclidean_dim(w); }
  double curvature() const { return -lorentz::inner(w, w); }
  bool contains(const LorentzVector& v, double tol = lorentz::kNullTolerance) const;
  /// Rescales a null vector onto E(w); throws DegeneracyError when (v, w) = 0.
  LorentzVector normalize(const LorentzVector& v) const;
};

/// Null pair (v0, v_inf) with (v0, v_inf) = -1 fixing a Euclidean chart.
struct SpaceFormPair {
  LorentzVector v0;
  LorentzVector vinf;

  static SpaceFormPair standard(int n) { return {lorentz::v0(n), lorentz::vinf(n)}; }
  void validate() const;
  /// Orthogonal projection onto <v0, v_inf>^perp.
  LorentzVector project(const LorentzVector& x) const;
};

namespace lorentz {

/// exp(x ^ v_inf) v0 = v0 + x + (x,x)/2 v_inf, with x in R^n given in e-coordinates.
LorentzVector lift_to_cone(const Eigen::VectorXd& x);
/// Same lift for an arbitrary chart; x must lie in <v0, v_inf>^perp.
LorentzVector lift_to_cone(const SpaceFormPair& pair, const LorentzVector& x);

/// Inverse of lift_to_cone on E(v_inf), returning e-coordinates.
/// Throws DegeneracyError ("point at infinity") when (F, v_inf) = 0.
Eigen::VectorXd stereo_project(const LorentzVector& F);
LorentzVector stereo_project(const SpaceFormPair& pair, const LorentzVector& F);

/// c on <hat_dir>, 1/c on <dir>, identity on their orthogonal complement.
OrthogonalMap gauge_map(const LorentzVector& dir, const LorentzVector& hat_dir, double c);

/// Matrix exponential of a skew map (scaling and squaring with a truncated
/// Taylor series, followed by a metric correction pass if needed).
OrthogonalMap exp_bivector(const Bivector& b);

/// Exponential of a general square matrix; used for block ladder systems.
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

/// Angle between the lines spanned by a and b in coordinate Euclidean norm.
double line_angle(const LorentzVector& a, const LorentzVector& b);

}  // namespace lorentz
}  // namespace isothermic
