#pragma once

// Darboux, Christoffel and T-transforms of isothermic patches, with the
// transport of polynomial conserved quantities across them.

#include "isothermic/conserved.hpp"

#include <vector>

namespace isothermic {

/// Gauge transformation Gamma_L^Lhat(c) for null lines L = <F>, Lhat = <G>:
/// c on Lhat, 1/c on L and the identity on (L + Lhat)^perp.
Eigen::MatrixXd gauge_gamma(const LorentzVector& F, const LorentzVector& G, double c);

/// Components of x along L, Lhat and (L + Lhat)^perp.
struct LineSplit {
  LorentzVector on_l, on_lhat, perp;
};
LineSplit split_lines(const LorentzVector& F, const LorentzVector& G, const LorentzVector& x);

/// Null seed at a node on the circle of radius r in the tangent plane:
/// F + r (cos a W_1 + sin a W_2) + r^2/2 Fhat with Fhat the null vector
/// pairing to -1 with F and orthogonal to the tangent plane.
LorentzVector darboux_seed(const SurfacePatch& patch, int node, double angle, double radius = 2.0);

struct DarbouxOptions {
  int order = 4;
  int base_node = 0;
  double degeneracy_tol = 1e-6;  // |(F, G)| / (|F| |G|) below this flags a node
};

struct DarbouxPair {
  SurfacePatch source;
  EtaField source_eta;
  SurfacePatch target;
  EtaField target_eta;
  double m = 0.0;
  Field<LorentzVector> G;  // (d + m eta)-parallel lift of the target, on the pair's grid
  // Offset of the pair's grid inside the grid it was built from; non-zero
  // only when degenerate nodes forced a truncation.
  int offset_i = 0;
  int offset_j = 0;
  bool truncated = false;
  double nullity = 0.0;         // max |(G, G)| / |G|^2
  double separation = 0.0;      // min |(F, G)| / (|F| |G|)
  double gauge_residual = 0.0;  // max |Gamma(1 - t/m).(d + t eta) - (d + t etahat)| over sample t
  double consistency = 0.0;     // cross-edge mismatch of the integrated section
};

/// Integrates G = parallel_section(m, seed) and builds the target patch in
/// the source space form. Truncates to the largest clean sub-rectangle when
/// G meets L; throws GeometryError "transform degenerates" when no clean
/// rectangle of at least 8 x 8 nodes remains.
DarbouxPair darboux_transform(const SurfacePatch& source, const EtaField& eta, double m, const LorentzVector& seed,
                              const DarbouxOptions& options = {});

/// Darboux pair from an already known (d + m eta)-parallel null section,
/// without integration.
DarbouxPair darboux_pair_from_section(const SurfacePatch& source, const EtaField& eta, double m,
                                      const Field<LorentzVector>& G, const DarbouxOptions& options = {});

/// p restricted to the pair's grid (identity unless the pair was truncated).
PolynomialSection restrict_to_pair(const PolynomialSection& p, const DarbouxPair& pair);

/// Gauge of p across the pair, phat(t) = Gamma(1 - t/m) p(t), extended
/// through t = m. Requires (p(m), G) = 0 within tol relative to norms.
PolynomialSection gauge_conserved(const PolynomialSection& p, const DarbouxPair& pair, double tol = 1e-6);

/// q(t) = (1 - t/m) p(t).
PolynomialSection promote_degree(const PolynomialSection& p, double m);

/// Divides p(t) by (1 - t/m); the remainder p(m) is returned through
/// remainder (max-node norm).
PolynomialSection divide_degree(const PolynomialSection& p, double m, double* remainder = nullptr);

/// Complementary surface <p(m)> at a non-zero root m of the spectral
/// polynomial; eta is the form p is conserved for.
DarbouxPair complementary_surface(const PolynomialSection& p, const SurfacePatch& patch, const EtaField& eta,
                                  double m);

/// One complementary surface per distinct real non-zero root.
std::vector<DarbouxPair> complementary_surfaces(const PolynomialSection& p, const SurfacePatch& patch,
                                                const EtaField& eta);

struct Demotion {
  DarbouxPair pair;
  PolynomialSection quantity;  // degree d - 1, conserved on pair.target
  double division_residual = 0.0;
};

/// Degree d - 1 quantity on the complementary surface at a repeated root m.
Demotion demote_at_repeated_root(const PolynomialSection& p, const SurfacePatch& patch, const EtaField& eta,
                                 double m, double tol = 1e-6);

struct ChristoffelResult {
  SurfacePatch patch;      // stored in the chart with v0 and v_inf exchanged, so f is f^c
  EtaField eta;
  SpaceFormPair pair;
  double closedness = 0.0;      // plaquette loop integral of df^c per unit area
  double gauge_residual = 0.0;  // Gamma^c(t).(d + t eta) against d + t eta^c over sample t
  double conformal_factor = 0.0;  // max |e^{theta^c} - scale e^{-theta}|
};

/// Christoffel transform with f^c_u = s e^{-2 theta} f_u, f^c_v = -s e^{-2 theta} f_v,
/// s the eta scale, integrated from f^c = 0 at node 0. The patch must be
/// lifted into E(v_inf) of the pair. Throws GeometryError "not
/// isothermic-parametrized" when the closedness residual exceeds tol.
ChristoffelResult christoffel_transform(const SurfacePatch& patch, const EtaField& eta,
                                        const SpaceFormPair& pair = SpaceFormPair::standard(3), double tol = 1e-3);

/// q(t) = Gamma^c(t) p(t) expressed in the chart of result.patch. Requires
/// p(0) orthogonal to v_inf.
PolynomialSection christoffel_conserved(const PolynomialSection& p, const SurfacePatch& patch,
                                        const ChristoffelResult& result, double tol = 1e-8);

struct TTransform {
  double s = 0.0;
  SurfacePatch patch;
  EtaField eta;
  ParallelFrame frame;
  double eta_mismatch = 0.0;    // max |Phi eta Phi^{-1} - eta_s|
  double shift_residual = 0.0;  // max over sample t of the shifted-pencil identity, finite differences
};

/// T-transform Lambda_s = Phi_s Lambda with Phi_s from the parallel frame.
TTransform t_transform(const SurfacePatch& patch, const EtaField& eta, double s, int order = 4);

/// q(t) = Phi_s p(t + s).
PolynomialSection t_transform_conserved(const PolynomialSection& p, const TTransform& tt);

struct LawsonResult {
  double H = 0.0, K = 0.0;
  double H_s = 0.0, K_s = 0.0;
  double defect = 0.0;  // |H_s^2 + K_s - (H^2 + K)|
};

/// Lawson correspondence read off the transported type-1 quantity.
LawsonResult lawson_check(const SurfacePatch& patch, double s, int order = 4);

struct BianchiQuadrilateral {
  DarbouxPair pair;         // fourth surface as a Darboux transform of pair1.target with parameter m2
  double agreement = 0.0;   // max line angle between the three closed-form expressions
  double parallelism = 0.0; // |dGhat + m2 eta_1 Ghat| / |Ghat| by finite differences
};

BianchiQuadrilateral bianchi_quadrilateral(const DarbouxPair& pair1, const DarbouxPair& pair2);

/// Double gauge of p across the quadrilateral; requires p(m_i) orthogonal to L_i.
PolynomialSection bianchi_conserved(const PolynomialSection& p, const DarbouxPair& pair1,
                                    const BianchiQuadrilateral& quad, double tol = 1e-6);

}  // namespace isothermic
