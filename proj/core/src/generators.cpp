#include "isothermic/surface.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

namespace isothermic {

namespace {

struct ProfileValue {
  double phi, d1, d2;
};

ProfileValue eval_profile(RevolutionProfile profile, const GeneratorParams& p, double v) {
  switch (profile) {
    case RevolutionProfile::constant:
      return {std::log(p.radius), 0.0, 0.0};
    case RevolutionProfile::linear:
      return {p.slope * v + p.offset, p.slope, 0.0};
    case RevolutionProfile::logcosh: {
      const double t = std::tanh(v);
      return {std::log(p.radius * std::cosh(v)), t, 1.0 - t * t};
    }
    case RevolutionProfile::mercator: {
      const double t = std::tanh(v);
      return {std::log(p.radius / std::cosh(v)), -t, -(1.0 - t * t)};
    }
    case RevolutionProfile::polynomial: {
      double phi = 0.0, d1 = 0.0, d2 = 0.0;
      for (std::size_t k = p.coefficients.size(); k-- > 0;) {
        d2 = d2 * v + 2.0 * d1;
        d1 = d1 * v + phi;
        phi = phi * v + p.coefficients[k];
      }
      return {phi, d1, d2};
    }
  }
  throw GeometryError("unknown revolution profile");
}

[[noreturn]] void profile_error(double v) {
  std::ostringstream os;
  os << "profile not conformally parametrizable at given grid: |phi'| >= 1 at v = " << v;
  throw GeometryError(os.str());
}

// zeta(v) = int_0^v e^phi sqrt(1 - phi'^2), composite Gauss-Legendre.
double profile_height(RevolutionProfile profile, const GeneratorParams& p, double v) {
  auto integrand = [&](double s) {
    const ProfileValue pv = eval_profile(profile, p, s);
    const double r = 1.0 - pv.d1 * pv.d1;
    if (!(r > 0.0)) profile_error(s);
    return std::exp(pv.phi) * std::sqrt(r);
  };
  const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(v) / 0.125)));
  double total = 0.0;
  for (int k = 0; k < pieces; ++k) {
    const double a = v * k / pieces;
    const double b = v * (k + 1) / pieces;
    total += boost::math::quadrature::gauss<double, 20>::integrate(integrand, a, b);
  }
  return total;
}

Eigen::VectorXd vec3(double x, double y, double z) { return Eigen::Vector3d(x, y, z); }

EuclideanJet revolution_jet(RevolutionProfile profile, const GeneratorParams& p, double u, double v, double zeta) {
  const ProfileValue pv = eval_profile(profile, p, v);
  const double r2 = 1.0 - pv.d1 * pv.d1;
  if (!(r2 > 0.0)) profile_error(v);
  const double r = std::sqrt(r2);
  const double e = std::exp(pv.phi);
  const double c = std::cos(u);
  const double s = std::sin(u);
  const double z1 = e * r;
  const double z2 = e * (pv.d1 * r - pv.d1 * pv.d2 / r);
  const double a = pv.d2 + pv.d1 * pv.d1;
  return {vec3(e * c, e * s, zeta),         vec3(-e * s, e * c, 0.0),
          vec3(pv.d1 * e * c, pv.d1 * e * s, z1), vec3(-e * c, -e * s, 0.0),
          vec3(-pv.d1 * e * s, pv.d1 * e * c, 0.0), vec3(a * e * c, a * e * s, z2)};
}

EuclideanJet torus_jet(const GeneratorParams& p, double u, double v) {
  const double R = p.major_radius;
  const double r = p.radius;
  if (!(R > r && r > 0.0)) throw GeometryError("torus needs major_radius > radius > 0");
  const double k = std::sqrt(R * R - r * r);
  const double arg = v * k / (2.0 * r);
  if (std::abs(arg) >= std::numbers::pi / 2) throw GeometryError("torus v-range exceeds one meridian period");
  const double sigma = 2.0 * std::atan(std::sqrt((R + r) / (R - r)) * std::tan(arg));
  const double cs = std::cos(sigma);
  const double sn = std::sin(sigma);
  const double rho = R + r * cs;
  const double rho1 = -sn * rho;
  const double rho2 = -cs * rho * rho / r + sn * sn * rho;
  const double z1 = cs * rho;
  const double z2 = -sn * rho * rho / r - cs * sn * rho;
  const double c = std::cos(u);
  const double s = std::sin(u);
  return {vec3(rho * c, rho * s, r * sn),     vec3(-rho * s, rho * c, 0.0), vec3(rho1 * c, rho1 * s, z1),
          vec3(-rho * c, -rho * s, 0.0),      vec3(-rho1 * s, rho1 * c, 0.0), vec3(rho2 * c, rho2 * s, z2)};
}

EuclideanJet perturbed_cylinder_jet(double eps, double u, double v) {
  const double c = std::cos(u);
  const double s = std::sin(u);
  const double cv = std::cos(v);
  const double sv = std::sin(v);
  return {vec3(c, s, v + eps * s * sv),     vec3(-s, c, eps * c * sv),      vec3(0.0, 0.0, 1.0 + eps * s * cv),
          vec3(-c, -s, -eps * s * sv),      vec3(0.0, 0.0, eps * c * cv),    vec3(0.0, 0.0, -eps * s * sv)};
}

EuclideanJet clifford_jet(double u, double v) {
  const double a = 1.0 / std::sqrt(2.0);
  const double c = std::cos(u), s = std::sin(u), cv = std::cos(v), sv = std::sin(v);
  auto v4 = [a](double x0, double x1, double x2, double x3) {
    Eigen::VectorXd out(4);
    out << a * x0, a * x1, a * x2, a * x3;
    return out;
  };
  return {v4(c, s, cv, sv), v4(-s, c, 0, 0), v4(0, 0, -sv, cv), v4(-c, -s, 0, 0), v4(0, 0, 0, 0), v4(0, 0, -cv, -sv)};
}

// F = w + (cos u e1 + sin u e2 + cos v e3 + sin v x4)/sqrt 2 with
// w = (v0 + v_inf)/sqrt 2 and x4 = (v0 - v_inf)/sqrt 2.
LorentzJet clifford_s3_jet(double u, double v) {
  const double a = 1.0 / std::sqrt(2.0);
  const int n = 3;
  const LorentzVector w = a * (lorentz::v0(n) + lorentz::vinf(n));
  const LorentzVector x4 = a * (lorentz::v0(n) - lorentz::vinf(n));
  const LorentzVector e1 = lorentz::e(n, 1), e2 = lorentz::e(n, 2), e3 = lorentz::e(n, 3);
  const double c = std::cos(u), s = std::sin(u), cv = std::cos(v), sv = std::sin(v);
  LorentzJet j;
  j.F = w + a * (c * e1 + s * e2 + cv * e3 + sv * x4);
  j.Fu = a * (-s * e1 + c * e2);
  j.Fv = a * (-sv * e3 + cv * x4);
  j.Fuu = a * (-c * e1 - s * e2);
  j.Fuv = lorentz::zero(n);
  j.Fvv = a * (-cv * e3 - sv * x4);
  return j;
}

}  // namespace

SurfaceKind parse_surface_kind(const std::string& name) {
  static const std::pair<const char*, SurfaceKind> table[] = {
      {"cylinder", SurfaceKind::cylinder},
      {"revolution", SurfaceKind::revolution},
      {"cone", SurfaceKind::cone},
      {"sphere_patch", SurfaceKind::sphere_patch},
      {"custom_profile", SurfaceKind::custom_profile},
      {"torus", SurfaceKind::torus},
      {"perturbed_cylinder", SurfaceKind::perturbed_cylinder},
      {"clifford_torus", SurfaceKind::clifford_torus},
      {"clifford_torus_s3", SurfaceKind::clifford_torus_s3},
  };
  for (const auto& [key, kind] : table)
    if (name == key) return kind;
  throw GeometryError("unknown surface kind '" + name + "'");
}

std::string to_string(SurfaceKind kind) {
  switch (kind) {
    case SurfaceKind::cylinder: return "cylinder";
    case SurfaceKind::revolution: return "revolution";
    case SurfaceKind::cone: return "cone";
    case SurfaceKind::sphere_patch: return "sphere_patch";
    case SurfaceKind::custom_profile: return "custom_profile";
    case SurfaceKind::torus: return "torus";
    case SurfaceKind::perturbed_cylinder: return "perturbed_cylinder";
    case SurfaceKind::clifford_torus: return "clifford_torus";
    case SurfaceKind::clifford_torus_s3: return "clifford_torus_s3";
  }
  return "unknown";
}

RevolutionProfile parse_profile(const std::string& name) {
  if (name == "constant") return RevolutionProfile::constant;
  if (name == "linear") return RevolutionProfile::linear;
  if (name == "logcosh") return RevolutionProfile::logcosh;
  if (name == "mercator") return RevolutionProfile::mercator;
  if (name == "polynomial") return RevolutionProfile::polynomial;
  throw GeometryError("unknown revolution profile '" + name + "'");
}

std::string to_string(RevolutionProfile profile) {
  switch (profile) {
    case RevolutionProfile::constant: return "constant";
    case RevolutionProfile::linear: return "linear";
    case RevolutionProfile::logcosh: return "logcosh";
    case RevolutionProfile::mercator: return "mercator";
    case RevolutionProfile::polynomial: return "polynomial";
  }
  return "unknown";
}

SurfacePatch generate_surface(SurfaceKind kind, const GeneratorParams& params, const CoordGrid& grid,
                              const SpaceForm& w) {
  grid.validate();
  const auto size = static_cast<std::size_t>(grid.size());
  SurfacePatch patch;

  if (kind == SurfaceKind::clifford_torus_s3) {
    Field<LorentzJet> raw(size);
    for (int j = 0; j < grid.nv; ++j)
      for (int i = 0; i < grid.nu; ++i) raw[static_cast<std::size_t>(grid.index(i, j))] = clifford_s3_jet(grid.u(i), grid.v(j));
    const double a = 1.0 / std::sqrt(2.0);
    patch = assemble_patch(grid, std::move(raw), SpaceForm(a * (lorentz::v0(3) + lorentz::vinf(3))));
  } else {
    RevolutionProfile profile = params.profile;
    if (kind == SurfaceKind::cone) profile = RevolutionProfile::linear;
    if (kind == SurfaceKind::sphere_patch) profile = RevolutionProfile::mercator;
    if (kind == SurfaceKind::custom_profile) profile = RevolutionProfile::polynomial;
    if (kind == SurfaceKind::custom_profile && params.coefficients.empty())
      throw GeometryError("custom_profile needs polynomial coefficients");
    if (kind == SurfaceKind::cylinder && !(params.radius > 0.0)) throw GeometryError("cylinder radius must be positive");
    if ((kind == SurfaceKind::sphere_patch || profile == RevolutionProfile::constant ||
         profile == RevolutionProfile::logcosh) && !(params.radius > 0.0))
      throw GeometryError("radius must be positive");

    Field<double> zeta(static_cast<std::size_t>(grid.nv), 0.0);
    const bool uses_profile = kind == SurfaceKind::revolution || kind == SurfaceKind::cone ||
                              kind == SurfaceKind::sphere_patch || kind == SurfaceKind::custom_profile;
    if (uses_profile)
      for (int j = 0; j < grid.nv; ++j) zeta[static_cast<std::size_t>(j)] = profile_height(profile, params, grid.v(j));

    Field<EuclideanJet> jets(size);
    for (int j = 0; j < grid.nv; ++j) {
      for (int i = 0; i < grid.nu; ++i) {
        const double u = grid.u(i);
        const double v = grid.v(j);
        EuclideanJet& out = jets[static_cast<std::size_t>(grid.index(i, j))];
        switch (kind) {
          case SurfaceKind::cylinder: {
            const double r = params.radius;
            out = {vec3(r * std::cos(u), r * std::sin(u), r * v), vec3(-r * std::sin(u), r * std::cos(u), 0.0),
                   vec3(0.0, 0.0, r), vec3(-r * std::cos(u), -r * std::sin(u), 0.0), vec3(0.0, 0.0, 0.0),
                   vec3(0.0, 0.0, 0.0)};
            break;
          }
          case SurfaceKind::torus:
            out = torus_jet(params, u, v);
            break;
          case SurfaceKind::perturbed_cylinder:
            out = perturbed_cylinder_jet(params.amplitude, u, v);
            break;
          case SurfaceKind::clifford_torus:
            out = clifford_jet(u, v);
            break;
          default:
            out = revolution_jet(profile, params, u, v, zeta[static_cast<std::size_t>(j)]);
        }
      }
    }
    const int dim = static_cast<int>(jets.front().f.size());
    const SpaceForm form = lorentz::euclidean_dim(w.w) == dim ? w : SpaceForm::flat(dim);
    patch = assemble_patch(grid, jets, form);
  }

  ProvenanceStep step{"generate:" + to_string(kind), {}};
  step.params = {{"radius", params.radius}, {"major_radius", params.major_radius}, {"slope", params.slope},
                 {"offset", params.offset}, {"amplitude", params.amplitude}};
  for (std::size_t k = 0; k < params.coefficients.size(); ++k)
    step.params.emplace_back("c" + std::to_string(k), params.coefficients[k]);
  patch.provenance.push_back(std::move(step));
  return patch;
}

SurfacePatch unit_cylinder(int nu, int nv, const SpaceForm& w) {
  const CoordGrid grid = CoordGrid::make(nu, nv, 0.0, 2.0 * std::numbers::pi, -1.0, 1.0, true, false);
  return generate_surface(SurfaceKind::cylinder, GeneratorParams{}, grid, w);
}

}  // namespace isothermic
