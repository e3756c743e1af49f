#include "isothermic/transforms.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace iso = isothermic;
namespace lz = isothermic::lorentz;

namespace {

double spectral_gap(const iso::PolynomialSection& a, const iso::PolynomialSection& b) {
  const auto sa = iso::spectral_polynomial(a);
  const auto sb = iso::spectral_polynomial(b);
  double worst = 0.0;
  for (std::size_t k = 0; k < std::max(sa.coeffs.size(), sb.coeffs.size()); ++k) {
    const double x = k < sa.coeffs.size() ? sa.coeffs[k] : 0.0;
    const double y = k < sb.coeffs.size() ? sb.coeffs[k] : 0.0;
    worst = std::max(worst, std::abs(x - y));
  }
  return worst;
}

double max_line_angle(const iso::Field<iso::LorentzVector>& a, const iso::Field<iso::LorentzVector>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, lz::line_angle(a[k], b[k]));
  return worst;
}

struct Cylinder {
  iso::SurfacePatch patch;
  iso::EtaField eta;  // constant mean curvature scale
  iso::PolynomialSection p;
  explicit Cylinder(int n)
      : patch(iso::unit_cylinder(n, n, iso::SpaceForm::flat(3))),
        eta(iso::build_eta(patch, {iso::cmc_eta_scale(patch), false})),
        p(iso::build_type1(patch)) {}
};

const Cylinder& cylinder64() {
  static const Cylinder c(64);
  return c;
}

const iso::DarbouxPair& darboux07() {
  static const iso::DarbouxPair pair = [] {
    const auto& c = cylinder64();
    return iso::darboux_transform(c.patch, c.eta, 0.7, iso::darboux_seed(c.patch, 0, M_PI));
  }();
  return pair;
}

}  // namespace

TEST(Transforms, GammaActsOnLines) {
  const auto F = lz::lift_to_cone(Eigen::Vector3d(0.2, -0.1, 0.4));
  const auto G = lz::lift_to_cone(Eigen::Vector3d(-0.5, 0.3, 0.0));
  const auto gamma = iso::gauge_gamma(F, G, 3.0);
  EXPECT_LT((gamma * G - 3.0 * G).norm(), 1e-12);
  EXPECT_LT((gamma * F - F / 3.0).norm(), 1e-12);
  const auto split = iso::split_lines(F, G, lz::e(3, 1));
  EXPECT_LT(std::abs(lz::inner(split.perp, F)) + std::abs(lz::inner(split.perp, G)), 1e-12);
  EXPECT_LT(iso::OrthogonalMap{gamma}.orthogonality_residual(), 1e-12);
}

TEST(Transforms, SeedIsNullAndOffTheSurface) {
  const auto& c = cylinder64();
  for (double a : {0.0, 1.0, M_PI}) {
    const auto seed = iso::darboux_seed(c.patch, 5, a);
    EXPECT_LT(std::abs(lz::inner(seed, seed)), 1e-12);
    EXPECT_NEAR(lz::inner(seed, c.patch.F(5)), -2.0, 1e-12);
  }
}

TEST(Transforms, DarbouxPairDiagnostics) {
  const auto& pair = darboux07();
  EXPECT_LE(pair.nullity, 1e-10);
  EXPECT_LT(pair.gauge_residual, 1e-8);
  EXPECT_LT(pair.consistency, 1e-6);
  EXPECT_FALSE(pair.truncated);
  // The section has monodromy around the cylinder, so the periodic direction is opened.
  EXPECT_FALSE(pair.target.grid.periodic_u);
  EXPECT_LT(pair.target.diag.conformality, 1e-10);
  EXPECT_LT(pair.target.diag.curvature_line, 1e-10);
  ASSERT_FALSE(pair.target.provenance.empty());
  EXPECT_EQ(pair.target.provenance.back().kind, "darboux");
}

TEST(Transforms, DarbouxRaisesType) {
  const auto& pair = darboux07();
  const auto sv = iso::conserved_singular_values(pair.target_eta, 2);
  EXPECT_LE(sv.front(), 1e-5);
  EXPECT_GT(sv[1], 10.0 * sv.front());
  EXPECT_EQ(iso::solve_conserved(pair.target_eta, 2).size(), 1u);
  EXPECT_TRUE(iso::solve_conserved(pair.target_eta, 1).empty());
}

TEST(Transforms, GaugeOfPromotedQuantity) {
  const auto& c = cylinder64();
  const auto& pair = darboux07();
  const auto q = iso::promote_degree(c.p, pair.m);
  for (const auto& x : q.evaluate(pair.m)) EXPECT_LT(x.norm(), 1e-14);
  const auto qh = iso::gauge_conserved(q, pair);
  EXPECT_LT(spectral_gap(q, qh), 1e-8);
  for (std::size_t k = 0; k < q.coeffs[0].size(); ++k) EXPECT_EQ(qh.coeffs[0][k], q.coeffs[0][k]);
  // The transported quantity spans the solver's one-dimensional solution space.
  const auto sols = iso::solve_conserved(pair.target_eta, 2);
  ASSERT_EQ(sols.size(), 1u);
  EXPECT_LT(iso::constraint_residual(qh, pair.target_eta), 1e-6);
  // Without promotion the hypothesis fails.
  EXPECT_THROW(iso::gauge_conserved(c.p, pair), iso::GeometryError);
}

TEST(Transforms, PromoteDegreeBookkeeping) {
  const auto& c = cylinder64();
  const auto q = iso::promote_degree(c.p, 0.7);
  EXPECT_EQ(q.degree, 2);
  const auto sp = iso::spectral_polynomial(c.p), sq = iso::spectral_polynomial(q);
  for (double t : {-0.3, 0.2, 1.7})
    EXPECT_NEAR(sq.value(t), std::pow(1.0 - t / 0.7, 2) * sp.value(t), 1e-10);
  EXPECT_NEAR(q.residual, c.p.residual * (1.0 + 1.0 / 0.7), 1e-15);
  double rem = 1.0;
  const auto back = iso::divide_degree(q, 0.7, &rem);
  EXPECT_LT(rem, 1e-14);
  EXPECT_LT(spectral_gap(back, c.p), 1e-12);
}

TEST(Transforms, DarbouxInvolution) {
  const Cylinder c(128);
  const auto pair = iso::darboux_transform(c.patch, c.eta, 0.7, iso::darboux_seed(c.patch, 0, M_PI));
  const auto back = iso::darboux_transform(pair.target, pair.target_eta, 0.7, pair.source.F(0));
  iso::Field<iso::LorentzVector> source;
  for (int k = 0; k < c.patch.grid.size(); ++k) source.push_back(c.patch.F(k));
  EXPECT_LE(max_line_angle(back.G, source), 1e-6);
}

TEST(Transforms, DegenerateTransformIsRejectedOrTruncated) {
  const auto& c = cylinder64();
  const auto& full = darboux07();
  iso::DarbouxOptions opt;
  opt.degeneracy_tol = 1.5;  // every node is flagged
  EXPECT_THROW(iso::darboux_transform(c.patch, c.eta, 0.7, iso::darboux_seed(c.patch, 0, M_PI), opt),
               iso::DegeneracyError);
  opt.degeneracy_tol = 1.5 * full.separation;
  const auto pair = iso::darboux_transform(c.patch, c.eta, 0.7, iso::darboux_seed(c.patch, 0, M_PI), opt);
  EXPECT_TRUE(pair.truncated);
  EXPECT_GE(pair.separation, opt.degeneracy_tol);
  EXPECT_GE(pair.target.grid.nu, 8);
  const auto qh = iso::gauge_conserved(iso::promote_degree(c.p, 0.7), pair);
  EXPECT_LT(spectral_gap(iso::promote_degree(c.p, 0.7), qh), 1e-8);
  EXPECT_THROW(iso::darboux_transform(c.patch, c.eta, 0.7, iso::lorentz::e(3, 1)), iso::GeometryError);
}

TEST(Transforms, ComplementaryIsReflectedCylinder) {
  const auto& c = cylinder64();
  const auto pairs = iso::complementary_surfaces(c.p, c.patch, c.eta);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_NEAR(pairs[0].m, 1.0, 1e-10);
  double dev = 0.0;
  for (int j = 0; j < c.patch.grid.nv; ++j)
    for (int i = 0; i < c.patch.grid.nu; ++i) {
      const double u = c.patch.grid.u(i), v = c.patch.grid.v(j);
      const Eigen::Vector3d expect(-std::cos(u), -std::sin(u), v);
      dev = std::max(dev, (pairs[0].target.f[static_cast<std::size_t>(c.patch.grid.index(i, j))] - expect).norm());
    }
  EXPECT_LE(dev, 1e-8);
  const auto ph = iso::gauge_conserved(c.p, pairs[0]);
  EXPECT_LT(spectral_gap(c.p, ph), 1e-8);
}

TEST(Transforms, ComplementaryRejectsVanishingSection) {
  // The cylinder type-2 family is a promotion of type 1, so p vanishes at the double root.
  const auto patch = iso::unit_cylinder(32, 32, iso::SpaceForm::flat(3));
  iso::ClassConstants k{0.25 - 0.2, 0.1, -0.1, 1.0 / 16.0 + 0.1, patch.w};
  const auto p = iso::build_type2(patch, k);
  EXPECT_THROW(iso::complementary_surface(p, patch, iso::build_eta(patch), -0.2), iso::DegeneracyError);
}

TEST(Transforms, DemoteAtRepeatedRoot) {
  const auto& c = cylinder64();
  const auto& pair = darboux07();
  const auto q = iso::gauge_conserved(iso::promote_degree(c.p, pair.m), pair);
  const auto sq = iso::spectral_polynomial(q);
  ASSERT_TRUE(sq.has_repeated_root());
  const auto dm = iso::demote_at_repeated_root(q, pair.target, pair.target_eta, pair.m);
  EXPECT_EQ(dm.quantity.degree, 1);
  EXPECT_LE(dm.quantity.residual, 10.0 * q.residual);
  for (std::size_t k = 0; k < q.coeffs[0].size(); ++k) EXPECT_LT((dm.quantity.coeffs[0][k] - q.coeffs[0][k]).norm(), 1e-14);
  const auto sd = iso::spectral_polynomial(dm.quantity);
  for (double t : {-0.4, 0.3, 1.5}) EXPECT_NEAR(sd.value(t) * std::pow(1.0 - t / pair.m, 2), sq.value(t), 1e-8);
  // The complementary surface at the repeated root is the cylinder itself.
  iso::Field<iso::LorentzVector> source;
  for (int k = 0; k < c.patch.grid.size(); ++k) source.push_back(c.patch.F(k));
  EXPECT_LT(max_line_angle(dm.pair.G, source), 1e-8);
  EXPECT_THROW(iso::demote_at_repeated_root(q, pair.target, pair.target_eta, 1.0), iso::GeometryError);
}

TEST(Transforms, ChristoffelOfCylinder) {
  const auto& c = cylinder64();
  const auto ch = iso::christoffel_transform(c.patch, c.eta);
  EXPECT_TRUE(ch.patch.grid.periodic_u);
  EXPECT_LT(ch.gauge_residual, 1e-10);
  EXPECT_LT(ch.conformal_factor, 1e-10);
  // f^c = s (cos u, sin u, -v) + const with s the eta scale.
  const double s = c.eta.scale;
  const Eigen::VectorXd shift = ch.patch.f[0] - s * Eigen::Vector3d(std::cos(c.patch.grid.u(0)), std::sin(c.patch.grid.u(0)),
                                                                     -c.patch.grid.v(0));
  double dev = 0.0;
  for (int j = 0; j < c.patch.grid.nv; ++j)
    for (int i = 0; i < c.patch.grid.nu; ++i) {
      const Eigen::Vector3d x(std::cos(c.patch.grid.u(i)), std::sin(c.patch.grid.u(i)), -c.patch.grid.v(j));
      dev = std::max(dev, (ch.patch.f[static_cast<std::size_t>(c.patch.grid.index(i, j))] - shift - s * x).norm());
    }
  EXPECT_LT(dev, 1e-6);

  // Applying the transform twice returns the original up to translation and scale.
  const auto twice = iso::christoffel_transform(ch.patch, ch.eta);
  const Eigen::VectorXd offset = twice.patch.f[0] - c.patch.f[0];
  double back = 0.0;
  for (std::size_t k = 0; k < c.patch.f.size(); ++k) back = std::max(back, (twice.patch.f[k] - offset - c.patch.f[k]).norm());
  EXPECT_LT(back, 1e-5);
}

TEST(Transforms, ChristoffelConservedQuantity) {
  const auto& c = cylinder64();
  const auto ch = iso::christoffel_transform(c.patch, c.eta);
  const auto q = iso::christoffel_conserved(c.p, c.patch, ch);
  EXPECT_LT(spectral_gap(c.p, q), 1e-8);
  EXPECT_LT(q.residual, 1e-2);
  // p(0) = v_inf is in <v_inf>, so q(0) is a multiple of v0 in the original chart, v_inf after the swap.
  for (const auto& x : q.coeffs[0]) EXPECT_LT((x - x.dot(lz::vinf(3)) * lz::vinf(3)).norm(), 1e-10);

  auto bad = c.p;
  for (auto& x : bad.coeffs[0]) x += lz::v0(3);
  EXPECT_THROW(iso::christoffel_conserved(bad, c.patch, ch), iso::GeometryError);
}

TEST(Transforms, ChristoffelSwapsClass) {
  const auto patch = iso::unit_cylinder(64, 64, iso::SpaceForm::flat(3));
  const auto eta = iso::build_eta(patch);
  const iso::ClassConstants k{0.05, 0.1, -0.1, 1.0 / 16.0 + 0.1, patch.w};
  const auto p = iso::build_type2(patch, k);
  const auto ch = iso::christoffel_transform(patch, eta);
  const auto q = iso::christoffel_conserved(p, patch, ch);
  const auto back = iso::class_from_quantity(q, ch.patch);
  EXPECT_NEAR(back.A, k.A, 1e-8);
  EXPECT_NEAR(back.B, k.C, 1e-8);
  EXPECT_NEAR(back.C, k.B, 1e-8);
  EXPECT_NEAR(back.D, k.D, 1e-8);
  EXPECT_LT(iso::check_darboux_bianchi(ch.patch, {k.A, k.C, k.B, k.D, ch.patch.w}), 1e-8);
}

TEST(Transforms, ChristoffelRejectsNonIsothermicCoordinates) {
  iso::GeneratorParams gp;
  gp.amplitude = 0.01;
  const auto g = iso::CoordGrid::make(32, 32, 0, 2 * M_PI, -1, 1, true, false);
  const auto patch = iso::generate_surface(iso::SurfaceKind::perturbed_cylinder, gp, g, iso::SpaceForm::flat(3));
  const auto eta = iso::build_eta(patch);
  EXPECT_THROW(iso::christoffel_transform(patch, eta, iso::SpaceFormPair::standard(3), 1e-4), iso::GeometryError);
}

TEST(Transforms, TTransformShiftsSpectrum) {
  const auto& c = cylinder64();
  const auto id = iso::t_transform(c.patch, c.eta, 0.0);
  double move = 0.0;
  for (std::size_t k = 0; k < c.patch.f.size(); ++k) move = std::max(move, (id.patch.f[k] - c.patch.f[k]).norm());
  EXPECT_LT(move, 1e-12);

  const double s = 0.25;
  const auto tt = iso::t_transform(c.patch, c.eta, s);
  EXPECT_LT(tt.eta_mismatch, 1e-8);
  EXPECT_LT(tt.shift_residual, 1e-2);
  const auto q = iso::t_transform_conserved(c.p, tt);
  const auto sp = iso::spectral_polynomial(c.p), sq = iso::spectral_polynomial(q);
  // (t + s)^2 - (t + s) = t^2 + (2s - 1) t + s^2 - s
  EXPECT_NEAR(sq.coeffs[2], 1.0, 1e-8);
  EXPECT_NEAR(sq.coeffs[1], 2 * s - 1, 1e-8);
  EXPECT_NEAR(sq.coeffs[0], s * s - s, 1e-8);
  for (std::size_t k = 0; k < q.coeffs[0].size(); ++k)
    EXPECT_LT((q.coeffs[0][k] - tt.frame.phi[k].apply(c.p.evaluate(static_cast<int>(k), s))).norm(), 1e-12);
  EXPECT_GT(sp.coeffs.size(), 0u);
}

TEST(Transforms, LawsonCorrespondence) {
  const auto patch = iso::unit_cylinder(64, 64, iso::SpaceForm::flat(3));
  for (double s : {0.1, 0.25, 0.5}) {
    const auto l = iso::lawson_check(patch, s);
    EXPECT_LE(std::abs(l.H_s * l.H_s + l.K_s - 0.25), 1e-6) << s;
    EXPECT_NEAR(l.K_s, s - s * s, 1e-8);
    EXPECT_NEAR(l.H_s, 0.5 - s, 1e-8);
  }
  const auto l0 = iso::lawson_check(patch, 0.0);
  EXPECT_NEAR(l0.H_s, 0.5, 1e-12);
  EXPECT_NEAR(l0.K_s, 0.0, 1e-12);
  const auto g = iso::CoordGrid::make(32, 32, 0, 2 * M_PI, -1, 1, true, false);
  const auto cone = iso::generate_surface(iso::SurfaceKind::cone, {}, g, iso::SpaceForm::flat(3));
  EXPECT_THROW(iso::lawson_check(cone, 0.25), iso::GeometryError);
}

TEST(Transforms, BianchiPermutability) {
  const auto& c = cylinder64();
  const auto& pa = darboux07();
  const auto pb = iso::darboux_transform(c.patch, c.eta, 1.3, iso::darboux_seed(c.patch, 0, 2.8));
  ASSERT_FALSE(pb.truncated);
  const auto quad = iso::bianchi_quadrilateral(pa, pb);
  EXPECT_LT(quad.agreement, 1e-8);
  EXPECT_LT(quad.parallelism, 5e-2);
  EXPECT_LT(quad.pair.gauge_residual, 1e-6);
  const auto p = iso::promote_degree(iso::promote_degree(c.p, pa.m), pb.m);
  const auto ph = iso::bianchi_conserved(p, pa, quad);
  EXPECT_LT(spectral_gap(p, ph), 1e-6);
  for (std::size_t k = 0; k < p.coeffs[0].size(); ++k) EXPECT_LT((ph.coeffs[0][k] - p.coeffs[0][k]).norm(), 1e-12);
  EXPECT_THROW(iso::bianchi_quadrilateral(pa, pa), iso::GeometryError);
}

TEST(Transforms, ClassConstantsOfDarbouxTransformFollowEtaScale) {
  const auto& c = cylinder64();
  const auto& pair = darboux07();
  const auto q = iso::gauge_conserved(iso::promote_degree(c.p, pair.m), pair);
  const auto k = iso::class_from_quantity(q, pair.target, pair.target_eta.scale);
  EXPECT_NEAR(k.A, 0.6, 1e-6);
  EXPECT_NEAR(k.B, -0.175, 1e-6);
  EXPECT_NEAR(k.C, 0.175, 1e-6);
  EXPECT_NEAR(k.D, -0.1125, 1e-6);
  // The residual sits at the finite-difference level of H_u, H_v on the target.
  EXPECT_LT(iso::check_darboux_bianchi(pair.target, k), 1e-2);
  const auto fit = iso::fit_class_constants(pair.target, pair.target.w);
  EXPECT_NEAR(fit.consts.A, k.A, 1e-2);
  EXPECT_NEAR(fit.consts.D, k.D, 1e-2);
  // Ignoring the scale gives constants that do not satisfy the equation.
  EXPECT_GT(iso::check_darboux_bianchi(pair.target, iso::class_from_quantity(q, pair.target)), 0.5);
}
