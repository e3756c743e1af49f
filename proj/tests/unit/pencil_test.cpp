#include "isothermic/pencil.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace iso = isothermic;
namespace lz = isothermic::lorentz;

namespace {

struct CylinderFixture {
  iso::SurfacePatch patch;
  iso::EtaField eta;
  explicit CylinderFixture(int n) : patch(iso::unit_cylinder(n, n, iso::SpaceForm::flat(3))), eta(iso::build_eta(patch)) {}
};

}  // namespace

TEST(Pencil, TreeCoversGridOnce) {
  const auto g = iso::CoordGrid::make(10, 9, 0, 1, 0, 1, true, false);
  const auto tree = iso::integration_tree(g, g.index(3, 4));
  std::vector<int> reached(static_cast<std::size_t>(g.size()), 0);
  reached[static_cast<std::size_t>(g.index(3, 4))] = 1;
  for (const auto& e : tree.tree) {
    ASSERT_EQ(reached[static_cast<std::size_t>(e.from)], 1);
    ++reached[static_cast<std::size_t>(e.to)];
  }
  for (int r : reached) EXPECT_EQ(r, 1);
  EXPECT_EQ(static_cast<int>(tree.tree.size()), g.size() - 1);
  EXPECT_EQ(static_cast<int>(tree.cross.size()), (g.nu - 1) * (g.nv - 1));
  EXPECT_EQ(static_cast<int>(tree.wrap.size()), g.nv);
}

TEST(Pencil, MakeEdgeWrapsPeriodicDirections) {
  const auto g = iso::CoordGrid::make(8, 8, 0, 1, 0, 1, true, false);
  const auto e = iso::make_edge(g, g.index(7, 2), g.index(0, 2));
  EXPECT_EQ(e.axis, 0);
  EXPECT_EQ(e.step, 1);
  EXPECT_THROW(iso::make_edge(g, g.index(0, 7), g.index(0, 0)), iso::GeometryError);
  EXPECT_THROW(iso::make_edge(g, g.index(0, 0), g.index(2, 0)), iso::GeometryError);
}

TEST(Pencil, ZeroParameterIsIdentity) {
  CylinderFixture c(16);
  for (int order : {2, 4}) {
    const auto T = iso::edge_transport(c.eta, {0, 1, 0, 1}, 0.0, order);
    EXPECT_TRUE(T.m.isIdentity(0.0));
    EXPECT_LT(iso::holonomy_residual(c.eta, 0.0, order), 1e-14);
  }
  const auto frame = iso::parallel_frame(iso::make_atlas(c.eta), 0.0);
  for (const auto& phi : frame.phi) EXPECT_TRUE(phi.m.isIdentity(1e-15));
}

TEST(Pencil, TransportIsMetricAtSampleParameters) {
  CylinderFixture c(32);
  std::mt19937 rng(3);
  std::normal_distribution<double> d;
  for (double t : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) {
    for (int order : {2, 4}) {
      for (int k = 0; k < 20; ++k) {
        const int node = static_cast<int>(rng() % static_cast<unsigned>(c.patch.grid.size()));
        const int i = node % c.patch.grid.nu;
        const int j = node / c.patch.grid.nu;
        const int to = j + 1 < c.patch.grid.nv ? c.patch.grid.index(i, j + 1) : c.patch.grid.index((i + 1) % c.patch.grid.nu, j);
        const auto T = iso::edge_transport(c.eta, iso::make_edge(c.patch.grid, node, to), t, order);
        iso::LorentzVector x(5), y(5);
        for (int a = 0; a < 5; ++a) {
          x(a) = d(rng);
          y(a) = d(rng);
        }
        EXPECT_NEAR(lz::inner(T.apply(x), T.apply(y)), lz::inner(x, y), 1e-10 * x.norm() * y.norm());
      }
    }
  }
}

TEST(Pencil, TransportFixesLiftToSecondOrder) {
  auto defect = [](int n) {
    CylinderFixture c(n);
    const auto T = iso::edge_transport(c.eta, {0, 1, 0, 1}, 1.0, 2);
    return (T.apply(c.patch.F(0)) - c.patch.F(0)).norm();
  };
  const double d32 = defect(32);
  const double d64 = defect(64);
  EXPECT_LT(d64, 0.05 * std::pow(2 * M_PI / 64, 2) + 1e-2);
  EXPECT_GT(d32 / d64, 3.5);
}

TEST(Pencil, HolonomyScalingLawsMidpoint) {
  CylinderFixture c32(32);
  CylinderFixture c64(64);
  for (double t : {0.5, 1.0}) {
    const double r32 = iso::holonomy_residual(c32.eta, t, 2);
    const double r64 = iso::holonomy_residual(c64.eta, t, 2);
    EXPECT_GE(r32 / r64, 1.8);
    EXPECT_LE(r32 / r64, 4.5);
    const double r64_2t = iso::holonomy_residual(c64.eta, 2 * t, 2);
    EXPECT_GE(r64_2t / r64, 1.8);
    EXPECT_LE(r64_2t / r64, 2.2);
  }
}

TEST(Pencil, HolonomyFourthOrderConverges) {
  CylinderFixture c32(32);
  CylinderFixture c64(64);
  const double r32 = iso::holonomy_residual(c32.eta, 1.0, 4);
  const double r64 = iso::holonomy_residual(c64.eta, 1.0, 4);
  EXPECT_LT(r64, 1e-4);
  EXPECT_GT(r32 / r64, 10.0);
}

TEST(Pencil, ParallelSectionBasics) {
  CylinderFixture c(32);
  const auto atlas = iso::make_atlas(c.eta);
  const auto trivial = iso::parallel_section(atlas, 0.0, lz::vinf(3));
  for (const auto& v : trivial.values) EXPECT_LT((v - lz::vinf(3)).norm(), 1e-15);

  iso::LorentzVector seed = lz::v0(3) + 0.3 * lz::e(3, 1) + 0.045 * lz::vinf(3);
  ASSERT_TRUE(lz::is_null(seed));
  const auto s = iso::parallel_section(atlas, 0.7, seed);
  EXPECT_LT(s.norm_drift, 1e-10);
  EXPECT_LT(s.consistency, 1e-3);

  CylinderFixture fine(64);
  const auto s64 = iso::parallel_section(iso::make_atlas(fine.eta), 0.7, seed);
  EXPECT_GT(s.consistency / s64.consistency, 10.0);
}

TEST(Pencil, ParallelFrameGaugesConnectionAway) {
  auto residual = [](int n) {
    CylinderFixture c(n);
    const auto frame = iso::parallel_frame(iso::make_atlas(c.eta), 0.5);
    EXPECT_LT(frame.orthogonality, 1e-10);
    return frame.gauge_residual;
  };
  const double r32 = residual(32);
  const double r64 = residual(64);
  EXPECT_LT(r64, 5e-2);
  EXPECT_GT(r32 / r64, 3.5);
}

TEST(Pencil, MagnusExponentMatchesExactSolution) {
  // Y' = A(s) Y with A(s) = a + s b and [a, b] != 0, against a fine reference.
  Eigen::MatrixXd a = iso::Bivector::wedge(lz::e(3, 1), lz::e(3, 2)).m;
  Eigen::MatrixXd b = iso::Bivector::wedge(lz::v0(3), lz::e(3, 1)).m + iso::Bivector::wedge(lz::e(3, 2), lz::e(3, 3)).m;
  auto step_error = [&](double h, int order) {
    Eigen::MatrixXd ref = Eigen::MatrixXd::Identity(5, 5);
    const int fine = 4000;
    for (int k = 0; k < fine; ++k) {
      const double s0 = h * k / fine, s1 = h * (k + 1) / fine;
      ref = lz::expm(iso::magnus_exponent(a + s0 * b, a + s1 * b, b, b, s1 - s0, 4)) * ref;
    }
    const Eigen::MatrixXd approx = lz::expm(iso::magnus_exponent(a, a + h * b, b, b, h, order));
    return (approx - ref).norm();
  };
  EXPECT_GT(step_error(0.2, 2) / step_error(0.1, 2), 7.0);
  EXPECT_GT(step_error(0.2, 4) / step_error(0.1, 4), 28.0);
}
