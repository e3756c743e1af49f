#pragma once

// Surface patches in conformal curvature-line coordinates, their light-cone
// lift into a space form E(w), fundamental data and the closed 1-form eta.

#include "isothermic/grid.hpp"
#include "isothermic/lorentz.hpp"

#include <string>
#include <utility>
#include <vector>

namespace isothermic {

/// Second-order jet of a map into R^{n+1,1}.
struct LorentzJet {
  LorentzVector F, Fu, Fv, Fuu, Fuv, Fvv;
};

/// Second-order jet of a map into R^n.
struct EuclideanJet {
  Eigen::VectorXd f, fu, fv, fuu, fuv, fvv;
};

/// Jet of X / (-(X, w)), i.e. the representative of <X> in E(w).
LorentzJet rescale_jet(const LorentzJet& x, const LorentzVector& w);
/// Jet of the standard lift v0 + f + |f|^2/2 v_inf.
LorentzJet lift_jet(const EuclideanJet& e);
/// Jet of the stereographic image in R^n of a null jet.
EuclideanJet euclidean_jet(const LorentzJet& x);

/// One step of the construction history recorded in output files.
struct ProvenanceStep {
  std::string kind;
  std::vector<std::pair<std::string, double>> params;
};

struct SurfaceDiagnostics {
  /// max |(F_u,F_u) - (F_v,F_v)| and |(F_u,F_v)|, both divided by e^{2 theta}.
  double conformality = 0.0;
  /// max |II(d_u, d_v)| e^{-2 theta}.
  double curvature_line = 0.0;
  /// max |(F,F)| and |(F,w) + 1|.
  double membership = 0.0;
  /// max |H_uv + theta_u H_v + theta_v H_u| (codimension 1 only).
  double codazzi = 0.0;
  /// Smallest and largest value of the umbilic measure |k1 - k2| over nodes.
  double umbilic_min = 0.0;
  double umbilic_max = 0.0;
  int umbilic_nodes = 0;
  bool totally_umbilic = false;
};

inline constexpr double kUmbilicTolerance = 1e-6;

struct SurfacePatch {
  CoordGrid grid;
  int n = 3;
  SpaceForm w = SpaceForm::flat(3);

  Field<Eigen::VectorXd> f;  // stereographic image in R^n = <v0, v_inf>^perp
  Field<LorentzJet> jet;     // lift into E(w) with derivatives
  Field<double> theta, theta_u, theta_v;

  // Unit normals orthogonal to F, F_u, F_v and w; one per node for n = 3,
  // an orthonormal frame of the normal bundle otherwise.
  Field<std::vector<LorentzVector>> normal_frame;
  // Mean curvature vector e^{-2 theta}/2 times the normal part of F_uu + F_vv.
  Field<LorentzVector> mean_curvature;

  // Codimension-1 scalars (empty unless n == 3).
  Field<double> k1, k2, H, L, M;
  Field<double> H_u, H_v, H_uu, H_uv, H_vv;

  SurfaceDiagnostics diag;
  std::vector<ProvenanceStep> provenance;

  bool codimension_one() const { return n == 3; }
  const LorentzVector& F(int node) const { return jet[static_cast<std::size_t>(node)].F; }
  const LorentzVector& normal(int node) const { return normal_frame[static_cast<std::size_t>(node)].front(); }
};

/// Fills every derived field from null jets of any scale. The jets are first
/// rescaled into E(w). Throws GeometryError naming the node when the patch is
/// not immersed there.
SurfacePatch assemble_patch(const CoordGrid& grid, Field<LorentzJet> raw, const SpaceForm& w);
SurfacePatch assemble_patch(const CoordGrid& grid, const Field<EuclideanJet>& jets, const SpaceForm& w);

/// Fundamental data of sampled immersion values, with derivatives by
/// second-order finite differences.
SurfacePatch compute_fundamental(const CoordGrid& grid, const Field<Eigen::VectorXd>& f, const SpaceForm& w);

/// Euclidean jets of the patch (stereographic chart of v0, v_inf).
Field<EuclideanJet> euclidean_jets(const SurfacePatch& patch);

// ---------------------------------------------------------------------------
// Generators

enum class SurfaceKind {
  cylinder,          // (r cos u, r sin u, r v)
  revolution,        // profile exponent phi(v), see RevolutionProfile
  cone,              // revolution with phi = slope v + offset
  sphere_patch,      // round sphere of radius r in Mercator coordinates
  custom_profile,    // revolution with polynomial phi
  torus,             // torus of revolution, tube r around a circle of radius R
  perturbed_cylinder,  // unit cylinder plus eps sin u sin v e_3 (not isothermic)
  clifford_torus,    // (cos u, sin u, cos v, sin v)/sqrt 2 in R^4
  clifford_torus_s3  // minimal Clifford torus in the round space form S^3
};

enum class RevolutionProfile { constant, linear, logcosh, mercator, polynomial };

struct GeneratorParams {
  double radius = 1.0;
  double major_radius = 2.0;
  double slope = 0.3;
  double offset = 0.0;
  double amplitude = 0.01;
  RevolutionProfile profile = RevolutionProfile::logcosh;
  std::vector<double> coefficients;  // phi(v) = sum c_k v^k
};

SurfaceKind parse_surface_kind(const std::string& name);
std::string to_string(SurfaceKind kind);
RevolutionProfile parse_profile(const std::string& name);
std::string to_string(RevolutionProfile profile);

/// Builds a patch from closed-form jets. Revolution kinds integrate
/// zeta' = e^phi sqrt(1 - phi'^2) by Gauss-Legendre quadrature and throw
/// GeometryError if |phi'| >= 1 on the grid. Totally umbilic outputs are
/// flagged in diag.totally_umbilic. The clifford kinds fix their own
/// dimension and space form and ignore w.
SurfacePatch generate_surface(SurfaceKind kind, const GeneratorParams& params, const CoordGrid& grid,
                              const SpaceForm& w);

/// Unit-cylinder patch u in [0, 2pi) periodic, v in [-1, 1].
SurfacePatch unit_cylinder(int nu, int nv, const SpaceForm& w);

// ---------------------------------------------------------------------------
// The closed 1-form eta

struct EtaField {
  CoordGrid grid;
  int n = 3;
  double scale = 1.0;  // eta = scale * e^{-2 theta} F ^ (-F_u du + F_v dv)

  Field<Bivector> eta_u, eta_v;
  // Exact partial derivatives of the two components, from the 2-jet.
  Field<Bivector> eta_u_du, eta_u_dv, eta_v_du, eta_v_dv;

  // Factored form eta_X = F ^ dF(Q X), Q symmetric and trace-free.
  Field<LorentzVector> F, Fu, Fv;
  Field<Eigen::Matrix2d> Q;

  double closedness = 0.0;    // max plaquette |d eta| per unit area
  double annihilation = 0.0;  // max |eta_X F| / (|eta_X| |F|)
  double reassembly = 0.0;    // max |F ^ dF(QX) - eta_X|

  int dim() const { return n + 2; }
};

struct EtaOptions {
  double scale = 1.0;
  bool allow_umbilic = false;
};

/// Builds eta in the given coordinates. Throws GeometryError on umbilic
/// patches unless allowed, since eta is then not determined by the surface.
EtaField build_eta(const SurfacePatch& patch, const EtaOptions& options = {});

/// Scale under which eta = F ^ dp_1 for a constant mean curvature patch
/// (mean of L / 2). Requires codimension 1.
double cmc_eta_scale(const SurfacePatch& patch);

/// Max over plaquettes of the loop integral of eta (Hermite edge rule)
/// divided by the plaquette area.
double eta_closedness(const EtaField& eta);

struct QuadraticDifferential {
  Field<Eigen::Matrix2d> q;
  double trace_residual = 0.0;  // max |q_uu + q_vv| e^{-2 theta}
  double off_diagonal = 0.0;    // max |q_uv|
  double spread = 0.0;          // max deviation of q_uu from its mean
};

/// Recovers q from 1/2 q(X,Y) F = eta_X dF(Y).
QuadraticDifferential quadratic_differential(const EtaField& eta, const SurfacePatch& patch);

}  // namespace isothermic
