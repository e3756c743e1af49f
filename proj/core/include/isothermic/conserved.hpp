#pragma once

// Polynomial conserved quantities p(t) = p_0 + p_1 t + ... + p_d t^d of the
// pencil d + t eta: closed-form builders for types 1 and 2, a general
// degree-d solver, the spectral polynomial (p(t), p(t)) and the class
// constant checks for codimension-1 patches.

#include "isothermic/pencil.hpp"

#include <complex>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace isothermic {

struct PolynomialSection {
  int degree = 0;
  int n = 3;
  CoordGrid grid;
  std::vector<Field<LorentzVector>> coeffs;  // p_0 .. p_d
  // Optional exact partial derivatives of each coefficient. When empty the
  // residual checks fall back to finite differences.
  std::vector<Field<LorentzVector>> coeffs_u, coeffs_v;
  double residual = 0.0;         // max-node |(d + t eta) p(t)| over the sample parameters
  double singular_value = 0.0;   // solver output only: normalized constraint residual

  int dim() const { return n + 2; }
  bool has_derivatives() const { return !coeffs_u.empty() && !coeffs_v.empty(); }
  LorentzVector evaluate(int node, double t) const;
  Field<LorentzVector> evaluate(double t) const;
  /// Multiplies every coefficient (and derivative) by lambda.
  PolynomialSection scaled(double lambda) const;
};

struct ClassConstants {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double D = 0.0;
  SpaceForm w = SpaceForm::flat(3);
};

struct SpectralRoot {
  double value = 0.0;
  int multiplicity = 1;
};

struct SpectralPolynomial {
  std::vector<double> coeffs;  // coeffs[k] multiplies t^k, k = 0 .. 2d
  double constancy_residual = 0.0;
  std::vector<SpectralRoot> roots;  // real non-zero roots with multiplicity
  int zero_multiplicity = 0;
  int complex_roots = 0;            // count of roots discarded as non-real
  double cluster_tolerance = 0.0;   // absolute distance used for clustering at |m| = 1

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  double value(double t) const;
  bool has_repeated_root() const;
};

/// Parameters at which the ladder residual is sampled.
const std::vector<double>& residual_sample_parameters();

/// Max-node norm of (d + t eta) p(t) over the sample parameters, using the
/// exact coefficient derivatives when present.
double ladder_residual(const PolynomialSection& p, const EtaField& eta);

/// Per-coefficient ladder residuals |dp_0|, |dp_k + eta p_{k-1}|, |eta p_d|.
std::vector<double> ladder_components(const PolynomialSection& p, const EtaField& eta);

/// Type-1 quantity p(t) = w + lambda (H F + N) t of a constant mean
/// curvature patch, for eta = eta_scale * e^{-2 theta} F ^ (-F_u du + F_v dv).
/// lambda = eta_scale / (L / 2), so with the default eta_scale (mean L / 2) the spectral
/// polynomial is (p_1, p_1) t^2 + 2 (w, p_1) t + (w, w) with (p_1, p_1) = 1.
/// In higher codimension N is the unit mean curvature direction and must
/// be parallel with |H| constant. Throws GeometryError "not a generalized
/// H-surface" when the mean curvature spread exceeds tol.
PolynomialSection build_type1(const SurfacePatch& patch, std::optional<double> eta_scale = std::nullopt,
                              double tol = 1e-6);

/// Type-2 quantity p_0 = B w, p_1 = (L (w,w)/2 - C) F - H_u F_u + H_v F_v
/// - (M/2 + A) N + L w / 2, p_2 = H F + N, for the unscaled eta. The residual
/// measures how far the constants are from fitting.
PolynomialSection build_type2(const SurfacePatch& patch, const ClassConstants& consts);

struct SolverOptions {
  double tol = 1e-5;
  int order = 4;
  int base_node = 0;
};

/// Near-null space of the ladder constraints for degree d, one section per
/// singular value below tol, each normalized so that its spectral polynomial
/// is monic (or has largest coefficient 1 when the leading one vanishes).
/// Sections come back sorted by singular value. Throws GeometryError
/// "eta not closed enough to integrate" when eta.closedness > 10 tol.
std::vector<PolynomialSection> solve_conserved(const EtaField& eta, int d, const SolverOptions& options = {});

/// Singular values of the normalized ladder constraint matrix, ascending.
std::vector<double> conserved_singular_values(const EtaField& eta, int d, const SolverOptions& options = {});

/// Normalized constraint residual of p, the quantity the solver's singular
/// values measure.
double constraint_residual(const PolynomialSection& p, const EtaField& eta, int order = 4);

/// Residual of e^{2 theta}(H_u^2 + H_v^2) + M^2/4 + A M - 2 B H + C L + D
/// + L^2 K / 4 with K = -(w, w), max over nodes.
double check_darboux_bianchi(const SurfacePatch& patch, const ClassConstants& consts);

/// Max-node residual of the two second-order equations in H whose solutions
/// are the type-2 surfaces.
double check_type2_pde(const SurfacePatch& patch, double A, double B, double C, const SpaceForm& w);

/// Residual of the Codazzi consequence H_uv + theta_u H_v + theta_v H_u = 0.
double check_codazzi(const SurfacePatch& patch);

/// True when H_u H_v vanishes on more than 5% of the nodes, where the
/// converse "Bianchi-Darboux implies type 2" is not available.
bool converse_excluded(const SurfacePatch& patch);

struct ClassFit {
  ClassConstants consts;
  double pde_residual = 0.0;
  double bianchi_residual = 0.0;
  int null_dimension = 0;  // dimension of the (A, B, C) family fitting equally well
};

/// Least-squares (A, B, C) for the type-2 equations (minimum norm when the
/// patch leaves a family), then D from the Bianchi-Darboux equation.
ClassFit fit_class_constants(const SurfacePatch& patch, const SpaceForm& w);

SpectralPolynomial spectral_polynomial(const PolynomialSection& p);

/// Real roots of sum coeffs[k] t^k clustered with the given relative
/// tolerance; returns all real roots including zero.
std::vector<SpectralRoot> real_roots(const std::vector<double>& coeffs, double cluster_tol,
                                     int* complex_count = nullptr);

struct StructureReport {
  double constant_term = 0.0;   // spread of p_0 across the grid
  double orthogonality = 0.0;   // max |(p_d, X)| for X = F, W_1, W_2, e^{-2 theta} Delta F
  double parallelism = 0.0;     // max |(dp_d, Y)| for Y = F and the unit normals
};

StructureReport verify_structure(const PolynomialSection& p, const SurfacePatch& patch);

/// Class constants recovered from a degree-2 quantity of a codimension-1
/// patch: A from the t^3 coefficient, then D, then BC, then B from p_0 = B w.
/// C is BC / B, or (p_1, w) when B vanishes. p is first rescaled so that
/// p_2 = H F + N. eta_scale is the scale s of the form p is conserved for
/// (eta = s times the unit-scale form); the constants refer to scale 1.
ClassConstants class_from_quantity(const PolynomialSection& p, const SurfacePatch& patch, double eta_scale = 1.0);

/// Rescales a degree-2 quantity so that p_2 = H F + N (unit, positive along N).
PolynomialSection normalize_type2(const PolynomialSection& p, const SurfacePatch& patch);

void write_section(std::ostream& out, const PolynomialSection& p);
void write_section(const std::filesystem::path& path, const PolynomialSection& p);
PolynomialSection read_section(std::istream& in);
PolynomialSection read_section(const std::filesystem::path& path);

}  // namespace isothermic
