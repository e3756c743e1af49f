#pragma once

// Sphere congruences attached to isothermic surfaces and their Darboux
// transforms: the central sphere congruence, spherical systems, sphere-plane
// congruences, their coincidence tests and the quadric enveloping surface.

#include "isothermic/transforms.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace isothermic {

/// Subbundle of fixed rank spanned per node by the columns of basis[k],
/// with fibres of signature (positive, negative).
struct SphereCongruence {
  CoordGrid grid;
  int n = 3;
  int positive = 0;
  int negative = 1;
  Field<Eigen::MatrixXd> basis;

  int rank() const { return positive + negative; }
};

/// Counts the positive, negative and (near) zero eigenvalues of the Gram
/// matrix of the columns of b, relative to the largest one.
struct SignatureCount {
  int positive = 0, negative = 0, zero = 0;
};
SignatureCount signature(const Eigen::MatrixXd& b, double tol = 1e-9);

/// Throws GeometryError naming the first node whose Gram signature differs
/// from the declared one.
void verify_signature(const SphereCongruence& c, double tol = 1e-9);

/// Orthoprojection onto the column span of b (non-degenerate in the metric).
Eigen::MatrixXd orthoprojector(const Eigen::MatrixXd& b);

/// <F, F_u, F_v, Delta F> with Delta F = e^{-2 theta}(F_uu + F_vv).
SphereCongruence central_sphere_congruence(const SurfacePatch& patch);

struct SphericalSystem {
  SphereCongruence congruence;  // (Lambda^(1))^perp + Lhat, rank n
  double flatness = 0.0;        // max curvature of the orthoprojected connection, finite differences
  double orthogonality = 0.0;   // max |pi_C(dF) mod Lambda| / |dF|
};

SphericalSystem spherical_system(const DarbouxPair& pair);

/// C + <w>. Throws GeometryError naming nodes where w lies in C.
SphereCongruence sphere_planes(const SphereCongruence& c, const LorentzVector& w);

/// Max over nodes of the spectral norm of the difference of the Euclidean
/// orthogonal projectors onto the two subspaces (sine of the largest
/// principal angle).
double coincidence_test(const SphereCongruence& a, const SphereCongruence& b);

inline constexpr double kCoincidenceThreshold = 1e-4;

struct SpherePlaneCoincidence {
  double gap = 0.0;
  int principal_violations = 0;  // nodes where a curvature direction of Lambda lies in P
  std::optional<PolynomialSection> quantity;  // degree 2, when the planes coincide
  double beta = 0.0, beta_spread = 0.0;
  double q = 0.0, q_spread = 0.0;
  double decomposition = 0.0;  // least-squares misfit of F_1 = xi + beta F_2 + q w
  double constraint = 0.0;     // constraint_residual of the recovered quantity
};

/// Compares the sphere-planes of the two pairs for w
/// and, when they coincide, recovers the degree-2 quantity with
/// p(m1) = m1 F1, p(m2) = m2 beta F2, p(0) = m1 m2 q w / (m2 - m1).
SpherePlaneCoincidence sphere_plane_coincidence(const DarbouxPair& pair1, const DarbouxPair& pair2,
                                                const LorentzVector& w,
                                                double threshold = kCoincidenceThreshold);

struct SphericalCoincidence {
  double gap = 0.0;
  std::optional<PolynomialSection> quantity;  // degree 1, when the systems coincide
  double beta = 0.0, beta_spread = 0.0;
  double constraint = 0.0;
};

/// Coincidence of spherical systems and, when they coincide, the degree-1
/// quantity with p(m1) = F1, p(m2) = beta F2.
SphericalCoincidence spherical_coincidence_type1(const DarbouxPair& pair1, const DarbouxPair& pair2,
                                                 double threshold = kCoincidenceThreshold);

struct QuadricModel {
  double m = 0.0;
  double B = 0.0;
  // Coefficients of a^2, a b, a c, b c, a in the quadric relation among
  // (alpha, beta, gamma) = (a, b, c).
  double c_aa = 0.0, c_ab = 0.0, c_ac = 0.0, c_bc = 0.0, c_a = 0.0;
  double coefficient_drift = 0.0;  // change when recomputed from node-0 inner products

  Field<double> alpha, beta, gamma, s;
  Field<LorentzVector> G;            // null section spanning the enveloping surface, (G, w) = -1
  Field<Eigen::Vector3d> g;          // trivialized curve Psi(G_1) in the frame (Z, p(m), F)
  Field<Eigen::MatrixXd> frame;      // transported D-parallel frame of C, (Z, p(m), F) at the base node
  std::vector<int> excluded;         // nodes where (G_1, w) vanishes

  // Residuals are relative to the size of the data at each node, since G
  // runs off to infinity in E(w) where (G_1, w) is small.
  double relation_residual = 0.0;    // max |quadric relation at g| / (1 + |g|^2)
  double definition_residual = 0.0;  // max |gamma + alpha (p_2, p(m))| / (1 + |g|^2)^(1/2)
  double metric_residual = 0.0;      // max |(dG, dG) - (dg, dg)| / (1 + Euclidean |dG|^2 + |dg|^2)
  double frame_consistency = 0.0;    // cross-edge mismatch of the transported frame
  double envelope_residual = 0.0;    // max |dG_1 mod C| / |dG_1| with the solved alpha, beta

  double relation(const Eigen::Vector3d& x) const {
    return c_aa * x[0] * x[0] + c_ab * x[0] * x[1] + c_ac * x[0] * x[2] + c_bc * x[1] * x[2] + c_a * x[0];
  }
};

/// Enveloping surface of the sphere-planes of the complementary surface at m
/// for a degree-2 quantity in a flat space form E(w); p is rescaled so that
/// p_2 is a unit section. Throws GeometryError when p(m) meets Lambda or w is
/// not null.
QuadricModel envelope_quadric(const PolynomialSection& p, const SurfacePatch& patch, const EtaField& eta, double m,
                              const LorentzVector& w, int order = 4);

/// Trivialized curve g as CSV: header "alpha,beta,gamma" and one row per
/// node in row-major order (nan at excluded nodes).
void write_quadric_curve_csv(const std::filesystem::path& path, const QuadricModel& q);

/// Quadric coefficients as CSV with header "monomial,coefficient".
void write_quadric_coefficients_csv(const std::filesystem::path& path, const QuadricModel& q);

}  // namespace isothermic
