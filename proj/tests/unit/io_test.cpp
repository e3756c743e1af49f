#include "isothermic/io.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace iso = isothermic;

TEST(SurfaceIo, RoundTripWithJets) {
  auto p = iso::unit_cylinder(16, 12, iso::SpaceForm::flat(3));
  std::stringstream buf;
  iso::write_surface(buf, p);
  const auto q = iso::read_surface(buf);
  ASSERT_EQ(q.grid.nu, 16);
  ASSERT_EQ(q.grid.nv, 12);
  EXPECT_TRUE(q.grid.periodic_u);
  EXPECT_FALSE(q.grid.periodic_v);
  EXPECT_NEAR(q.grid.hu, p.grid.hu, 1e-15);
  for (std::size_t k = 0; k < p.f.size(); ++k) {
    EXPECT_LT((q.f[k] - p.f[k]).norm(), 1e-14);
    EXPECT_NEAR(q.H[k], 0.5, 1e-12);
  }
  ASSERT_EQ(q.provenance.size(), 1u);
  EXPECT_EQ(q.provenance.front().kind, "generate:cylinder");
}

TEST(SurfaceIo, ValuesOnlyFallsBackToFiniteDifferences) {
  const auto p = iso::unit_cylinder(32, 32, iso::SpaceForm::flat(3));
  std::stringstream buf;
  iso::write_surface(buf, p, false);
  const auto q = iso::read_surface(buf);
  for (std::size_t k = 0; k < p.f.size(); ++k) EXPECT_NEAR(q.H[k], 0.5, 0.02);
}

TEST(SurfaceIo, SeventeenDigits) {
  const auto p = iso::unit_cylinder(8, 8, iso::SpaceForm::flat(3));
  std::stringstream buf;
  iso::write_surface(buf, p, false);
  std::string line;
  for (int k = 0; k < 9; ++k) std::getline(buf, line);
  std::getline(buf, line);
  EXPECT_NE(line.find("0.70710678118654"), std::string::npos) << line;
}

TEST(SurfaceIo, RejectsMalformedInput) {
  std::stringstream bad("isothermic-surface 1\nn 3\ngrid 8\n");
  EXPECT_THROW(iso::read_surface(bad), iso::IoError);
  std::stringstream wrong("hello\n");
  EXPECT_THROW(iso::read_surface(wrong), iso::IoError);
  auto p = iso::unit_cylinder(8, 8, iso::SpaceForm::flat(3));
  std::stringstream buf;
  iso::write_surface(buf, p, false);
  std::string text = buf.str();
  text.resize(text.size() - 20);
  std::stringstream cut(text);
  EXPECT_THROW(iso::read_surface(cut), iso::IoError);
}

TEST(SurfaceIo, ScalarCsv) {
  const auto p = iso::unit_cylinder(8, 8, iso::SpaceForm::flat(3));
  std::stringstream buf;
  iso::write_scalar_csv(buf, p.grid, p.H, "H");
  const std::string text = buf.str();
  EXPECT_EQ(text.substr(0, 11), "i,j,u,v,H\n0");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 65);
  EXPECT_EQ(text.find('\r'), std::string::npos);
}
