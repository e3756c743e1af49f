#include "isothermic/conserved.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace iso = isothermic;
namespace lz = isothermic::lorentz;

namespace {

// Orthonormal-basis angle between two coefficient-stacked sections.
double section_angle(const iso::PolynomialSection& a, const iso::PolynomialSection& b) {
  Eigen::VectorXd x(0), y(0);
  for (std::size_t k = 0; k < a.coeffs.size(); ++k)
    for (std::size_t n = 0; n < a.coeffs[k].size(); ++n) {
      x.conservativeResize(x.size() + a.coeffs[k][n].size());
      y.conservativeResize(y.size() + b.coeffs[k][n].size());
      x.tail(a.coeffs[k][n].size()) = a.coeffs[k][n];
      y.tail(b.coeffs[k][n].size()) = b.coeffs[k][n];
    }
  const double c = std::abs(x.dot(y)) / (x.norm() * y.norm());
  return std::acos(std::min(1.0, c));
}

iso::ClassConstants cylinder_class(double B) {
  iso::ClassConstants c;
  c.A = 0.25 - 2.0 * B;
  c.B = B;
  c.C = -B;
  c.D = 1.0 / 16.0 + B;
  return c;
}

}  // namespace

TEST(Conserved, CylinderTypeOneClosedForm) {
  const auto patch = iso::unit_cylinder(64, 64, iso::SpaceForm::flat(3));
  const auto p = iso::build_type1(patch);
  EXPECT_LT(p.residual, 1e-8);
  const auto sp = iso::spectral_polynomial(p);
  ASSERT_EQ(sp.coeffs.size(), 3u);
  EXPECT_NEAR(sp.coeffs[0], 0.0, 1e-12);
  EXPECT_NEAR(sp.coeffs[1], -1.0, 1e-10);
  EXPECT_NEAR(sp.coeffs[2], 1.0, 1e-10);
  EXPECT_LT(sp.constancy_residual, 1e-8);
  ASSERT_EQ(sp.roots.size(), 1u);
  EXPECT_NEAR(sp.roots[0].value, 1.0, 1e-8);
  EXPECT_EQ(sp.zero_multiplicity, 1);

  const auto s = iso::verify_structure(p, patch);
  EXPECT_LT(s.constant_term, 1e-14);
  EXPECT_LT(s.orthogonality, 1e-10);
  EXPECT_LT(s.parallelism, 1e-10);
}

TEST(Conserved, TypeOneRejectsNonConstantMeanCurvature) {
  iso::GeneratorParams gp;
  const auto g = iso::CoordGrid::make(32, 32, 0, 2 * M_PI, -1, 1, true, false);
  const auto cone = iso::generate_surface(iso::SurfaceKind::cone, gp, g, iso::SpaceForm::flat(3));
  EXPECT_THROW(iso::build_type1(cone), iso::GeometryError);
  // The logcosh profile is the catenoid, a minimal surface: spectral polynomial t^2.
  gp.profile = iso::RevolutionProfile::logcosh;
  const auto catenoid = iso::generate_surface(iso::SurfaceKind::revolution, gp, g, iso::SpaceForm::flat(3));
  const auto sp = iso::spectral_polynomial(iso::build_type1(catenoid));
  EXPECT_NEAR(sp.coeffs[0], 0.0, 1e-10);
  EXPECT_NEAR(sp.coeffs[1], 0.0, 1e-10);
  EXPECT_NEAR(sp.coeffs[2], 1.0, 1e-10);
}

TEST(Conserved, CylinderTypeTwoFamily) {
  const auto patch = iso::unit_cylinder(64, 64, iso::SpaceForm::flat(3));
  for (double B : {0.0, 0.1, -0.3}) {
    const auto c = cylinder_class(B);
    const auto p = iso::build_type2(patch, c);
    EXPECT_LT(p.residual, 1e-8) << B;
    EXPECT_LT(iso::check_darboux_bianchi(patch, c), 1e-10);
    EXPECT_LT(iso::check_type2_pde(patch, c.A, c.B, c.C, patch.w), 1e-10);
    const auto sp = iso::spectral_polynomial(p);
    ASSERT_EQ(sp.coeffs.size(), 5u);
    EXPECT_NEAR(sp.coeffs[4], 1.0, 1e-8);
    EXPECT_NEAR(sp.coeffs[3], -2.0 * c.A, 1e-8);
    EXPECT_NEAR(sp.coeffs[2], c.A * c.A - c.D, 1e-8);
    EXPECT_NEAR(sp.coeffs[1], 2.0 * c.B * c.C, 1e-8);
    EXPECT_NEAR(sp.coeffs[0], 0.0, 1e-12);

    const auto back = iso::class_from_quantity(p, patch);
    EXPECT_NEAR(back.A, c.A, 1e-8);
    EXPECT_NEAR(back.B, c.B, 1e-8);
    EXPECT_NEAR(back.C, c.C, 1e-8);
    EXPECT_NEAR(back.D, c.D, 1e-8);
  }
  // B = 0 in a flat space form gives a double root at zero.
  const auto sp0 = iso::spectral_polynomial(iso::build_type2(patch, cylinder_class(0.0)));
  EXPECT_GE(sp0.zero_multiplicity, 2);
}

TEST(Conserved, TypeTwoResidualDetectsWrongConstants) {
  const auto patch = iso::unit_cylinder(32, 32, iso::SpaceForm::flat(3));
  auto c = cylinder_class(0.0);
  EXPECT_NEAR(iso::check_type2_pde(patch, 0.0, 0.0, 0.0, patch.w), 0.25, 1e-10);
  c.D += 1.0;
  EXPECT_NEAR(iso::check_darboux_bianchi(patch, c), 1.0, 1e-10);
  c = cylinder_class(0.0);
  c.A += 0.5;
  const auto bad = iso::build_type2(patch, c);
  const double pde = iso::check_type2_pde(patch, c.A, c.B, c.C, patch.w);
  EXPECT_GT(bad.residual, 0.1);
  EXPECT_LT(bad.residual / pde, 10.0);
  EXPECT_GT(bad.residual / pde, 0.1);
}

TEST(Conserved, FitRecoversCylinderFamily) {
  const auto patch = iso::unit_cylinder(32, 32, iso::SpaceForm::flat(3));
  const auto fit = iso::fit_class_constants(patch, patch.w);
  EXPECT_EQ(fit.null_dimension, 1);
  EXPECT_LT(fit.pde_residual, 1e-10);
  EXPECT_LT(fit.bianchi_residual, 1e-10);
  EXPECT_NEAR(fit.consts.C, -fit.consts.B, 1e-10);
  EXPECT_NEAR(fit.consts.A, 0.25 - 2.0 * fit.consts.B, 1e-10);
}

TEST(Conserved, CodazziHoldsOnGeneratedPatches) {
  const auto g = iso::CoordGrid::make(48, 48, 0, 2 * M_PI, -1, 1, true, false);
  for (auto kind : {iso::SurfaceKind::cylinder, iso::SurfaceKind::revolution, iso::SurfaceKind::cone}) {
    const auto patch = iso::generate_surface(kind, {}, g, iso::SpaceForm::flat(3));
    EXPECT_LT(iso::check_codazzi(patch), 0.05) << iso::to_string(kind);
  }
}

TEST(Conserved, SolverRecoversTypeOne) {
  const auto patch = iso::unit_cylinder(64, 64, iso::SpaceForm::flat(3));
  const auto eta = iso::build_eta(patch, {iso::cmc_eta_scale(patch), false});
  const auto sols = iso::solve_conserved(eta, 1);
  ASSERT_EQ(sols.size(), 1u);
  const auto ref = iso::build_type1(patch);
  EXPECT_LT(section_angle(sols[0], ref), 1e-6);
  const auto sp = iso::spectral_polynomial(sols[0]);
  EXPECT_NEAR(sp.coeffs[1], -1.0, 1e-6);
  EXPECT_TRUE(iso::solve_conserved(eta, 0).empty());
}

TEST(Conserved, ConstraintResidualReproducesSingularValues) {
  const auto patch = iso::unit_cylinder(32, 32, iso::SpaceForm::flat(3));
  const auto eta = iso::build_eta(patch, {iso::cmc_eta_scale(patch), false});
  iso::SolverOptions opt;
  opt.tol = 0.5;
  const auto sols = iso::solve_conserved(eta, 1, opt);
  ASSERT_GE(sols.size(), 3u);
  for (std::size_t k = 1; k < sols.size(); ++k)
    EXPECT_NEAR(iso::constraint_residual(sols[k], eta) / sols[k].singular_value, 1.0, 0.1);
}

TEST(Conserved, SolverFindsSphereContainedPatch) {
  const auto g = iso::CoordGrid::make(32, 32, 0, 2 * M_PI, 0, 2 * M_PI, true, true);
  const auto patch = iso::generate_surface(iso::SurfaceKind::clifford_torus, {}, g, iso::SpaceForm::flat(4));
  const auto eta = iso::build_eta(patch);
  const auto sols = iso::solve_conserved(eta, 0);
  ASSERT_EQ(sols.size(), 1u);
  const auto s = iso::verify_structure(sols[0], patch);
  EXPECT_LT(s.constant_term, 1e-8);
}

TEST(Conserved, SpectralScalingAndRoots) {
  const auto patch = iso::unit_cylinder(32, 32, iso::SpaceForm::flat(3));
  const auto p = iso::build_type2(patch, cylinder_class(0.1));
  const auto a = iso::spectral_polynomial(p);
  const auto b = iso::spectral_polynomial(p.scaled(3.0));
  for (std::size_t k = 0; k < a.coeffs.size(); ++k) EXPECT_NEAR(b.coeffs[k], 9.0 * a.coeffs[k], 1e-10);
  ASSERT_EQ(a.roots.size(), b.roots.size());
  for (std::size_t k = 0; k < a.roots.size(); ++k) EXPECT_NEAR(a.roots[k].value, b.roots[k].value, 1e-10);

  // (t - 0.7)^2 (t - 1) t
  const std::vector<double> c{0.0, -0.49, 0.49 + 1.4, -2.4, 1.0};
  const auto r = iso::real_roots(c, 1e-6);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[1].multiplicity, 2);
  EXPECT_NEAR(r[1].value, 0.7, 1e-7);
}

TEST(Conserved, StructureDetectsInjectedFault) {
  const auto patch = iso::unit_cylinder(32, 32, iso::SpaceForm::flat(3));
  auto p = iso::build_type1(patch);
  for (std::size_t k = 0; k < p.coeffs[1].size(); ++k) p.coeffs[1][k] += 0.1 * patch.jet[k].Fu;
  p.coeffs_u.clear();
  p.coeffs_v.clear();
  EXPECT_NEAR(iso::verify_structure(p, patch).orthogonality, 0.1, 1e-3);
}

TEST(Conserved, SectionRoundTrip) {
  const auto patch = iso::unit_cylinder(16, 16, iso::SpaceForm::flat(3));
  const auto p = iso::build_type2(patch, cylinder_class(0.2));
  std::stringstream ss;
  iso::write_section(ss, p);
  const auto q = iso::read_section(ss);
  ASSERT_EQ(q.degree, 2);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t n = 0; n < p.coeffs[k].size(); ++n) EXPECT_EQ(p.coeffs[k][n], q.coeffs[k][n]);
}

TEST(Conserved, TypeOneFollowsEtaScale) {
  const auto patch = iso::unit_cylinder(64, 64, iso::SpaceForm::flat(3));
  const auto p = iso::build_type1(patch, 1.0);
  EXPECT_LT(iso::ladder_residual(p, iso::build_eta(patch)), 1e-8);
  const auto sp = iso::spectral_polynomial(p);
  EXPECT_NEAR(sp.coeffs[2], 4.0, 1e-10);
  EXPECT_NEAR(sp.coeffs[1], -2.0, 1e-10);
  ASSERT_EQ(sp.roots.size(), 1u);
  EXPECT_NEAR(sp.roots[0].value, 0.5, 1e-8);
}
