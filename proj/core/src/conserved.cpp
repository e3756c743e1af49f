#include "isothermic/conserved.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace isothermic {

namespace {

using lorentz::inner;

double field_mean(const Field<double>& a) {
  double s = 0.0;
  for (double x : a) s += x;
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

double field_spread(const Field<double>& a) {
  if (a.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  return *hi - *lo;
}

void require_codim_one(const SurfacePatch& patch, const char* what) {
  if (!patch.codimension_one()) throw GeometryError(std::string(what) + " needs a codimension-1 patch");
}

std::pair<std::vector<Field<LorentzVector>>, std::vector<Field<LorentzVector>>> derivatives(
    const PolynomialSection& p) {
  if (p.has_derivatives()) return {p.coeffs_u, p.coeffs_v};
  std::vector<Field<LorentzVector>> du, dv;
  for (const auto& c : p.coeffs) {
    du.push_back(fd::d_u(p.grid, c));
    dv.push_back(fd::d_v(p.grid, c));
  }
  return {du, dv};
}

}  // namespace

LorentzVector PolynomialSection::evaluate(int node, double t) const {
  const auto k = static_cast<std::size_t>(node);
  LorentzVector out = coeffs[static_cast<std::size_t>(degree)][k];
  for (int i = degree - 1; i >= 0; --i) out = out * t + coeffs[static_cast<std::size_t>(i)][k];
  return out;
}

Field<LorentzVector> PolynomialSection::evaluate(double t) const {
  Field<LorentzVector> out(static_cast<std::size_t>(grid.size()));
  for (int k = 0; k < grid.size(); ++k) out[static_cast<std::size_t>(k)] = evaluate(k, t);
  return out;
}

PolynomialSection PolynomialSection::scaled(double lambda) const {
  PolynomialSection out = *this;
  for (auto* group : {&out.coeffs, &out.coeffs_u, &out.coeffs_v})
    for (auto& field : *group)
      for (auto& x : field) x *= lambda;
  return out;
}

const std::vector<double>& residual_sample_parameters() {
  static const std::vector<double> ts{-1.0, -0.5, 0.5, 1.0};
  return ts;
}

std::vector<double> ladder_components(const PolynomialSection& p, const EtaField& eta) {
  if (p.grid.size() != eta.grid.size() || p.dim() != eta.dim())
    throw GeometryError("conserved quantity and eta live on different grids");
  const auto [du, dv] = derivatives(p);
  const int d = p.degree;
  std::vector<double> out(static_cast<std::size_t>(d + 2), 0.0);
  for (std::size_t node = 0; node < static_cast<std::size_t>(p.grid.size()); ++node) {
    for (int k = 0; k <= d + 1; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      LorentzVector ru = LorentzVector::Zero(p.dim());
      LorentzVector rv = LorentzVector::Zero(p.dim());
      if (k <= d) {
        ru += du[ks][node];
        rv += dv[ks][node];
      }
      if (k >= 1) {
        ru += eta.eta_u[node].apply(p.coeffs[ks - 1][node]);
        rv += eta.eta_v[node].apply(p.coeffs[ks - 1][node]);
      }
      out[ks] = std::max({out[ks], ru.norm(), rv.norm()});
    }
  }
  return out;
}

double ladder_residual(const PolynomialSection& p, const EtaField& eta) {
  if (p.grid.size() != eta.grid.size() || p.dim() != eta.dim())
    throw GeometryError("conserved quantity and eta live on different grids");
  const auto [du, dv] = derivatives(p);
  double worst = 0.0;
  for (double t : residual_sample_parameters()) {
    for (std::size_t node = 0; node < static_cast<std::size_t>(p.grid.size()); ++node) {
      LorentzVector value = LorentzVector::Zero(p.dim());
      LorentzVector ru = LorentzVector::Zero(p.dim());
      LorentzVector rv = LorentzVector::Zero(p.dim());
      double tk = 1.0;
      for (int k = 0; k <= p.degree; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        value += tk * p.coeffs[ks][node];
        ru += tk * du[ks][node];
        rv += tk * dv[ks][node];
        tk *= t;
      }
      ru += t * eta.eta_u[node].apply(value);
      rv += t * eta.eta_v[node].apply(value);
      worst = std::max({worst, ru.norm(), rv.norm()});
    }
  }
  return worst;
}

PolynomialSection build_type1(const SurfacePatch& patch, std::optional<double> eta_scale, double tol) {
  const CoordGrid& g = patch.grid;
  const auto size = static_cast<std::size_t>(g.size());
  const bool codim1 = patch.codimension_one();

  // Unit normal N and the scalar h = (H, N).
  Field<LorentzVector> normal(size);
  Field<double> h(size), l(size);
  for (std::size_t k = 0; k < size; ++k) {
    const LorentzJet& j = patch.jet[k];
    if (codim1) {
      normal[k] = patch.normal_frame[k].front();
      h[k] = patch.H[k];
    } else {
      const LorentzVector& hv = patch.mean_curvature[k];
      const double len = std::sqrt(std::max(0.0, inner(hv, hv)));
      if (len < 1e-9) throw GeometryError("not a generalized H-surface: mean curvature vector vanishes");
      normal[k] = hv / len;
      h[k] = len;
    }
    l[k] = inner(j.Fuu - j.Fvv, normal[k]);
  }
  const double h_mean = field_mean(h);
  if (field_spread(h) > tol * (1.0 + std::abs(h_mean)))
    throw GeometryError("not a generalized H-surface: mean curvature spread " + std::to_string(field_spread(h)));

  const double scale = eta_scale.value_or(0.5 * field_mean(l));
  if (std::abs(scale) < 1e-12) throw GeometryError("eta scale vanishes");
  const double lambda = scale / (0.5 * field_mean(l));

  PolynomialSection p;
  p.degree = 1;
  p.n = patch.n;
  p.grid = g;
  p.coeffs.assign(2, Field<LorentzVector>(size));
  for (std::size_t k = 0; k < size; ++k) {
    p.coeffs[0][k] = patch.w.w;
    p.coeffs[1][k] = lambda * (h[k] * patch.jet[k].F + normal[k]);
  }
  if (codim1) {
    // Rodrigues in E(w): N_u = -k1 F_u, N_v = -k2 F_v.
    p.coeffs_u.assign(2, Field<LorentzVector>(size, LorentzVector::Zero(patch.n + 2)));
    p.coeffs_v = p.coeffs_u;
    for (std::size_t k = 0; k < size; ++k) {
      const LorentzJet& j = patch.jet[k];
      p.coeffs_u[1][k] = lambda * (patch.H_u[k] * j.F + (h[k] - patch.k1[k]) * j.Fu);
      p.coeffs_v[1][k] = lambda * (patch.H_v[k] * j.F + (h[k] - patch.k2[k]) * j.Fv);
    }
  }
  EtaOptions opts;
  opts.scale = scale;
  opts.allow_umbilic = true;
  p.residual = ladder_residual(p, build_eta(patch, opts));
  return p;
}

PolynomialSection build_type2(const SurfacePatch& patch, const ClassConstants& c) {
  require_codim_one(patch, "build_type2");
  const CoordGrid& g = patch.grid;
  const auto size = static_cast<std::size_t>(g.size());
  const LorentzVector& w = patch.w.w;
  const double ww = inner(w, w);
  const Field<double> L_u = fd::d_u(g, patch.L), L_v = fd::d_v(g, patch.L);
  const Field<double> M_u = fd::d_u(g, patch.M), M_v = fd::d_v(g, patch.M);

  PolynomialSection p;
  p.degree = 2;
  p.n = patch.n;
  p.grid = g;
  p.coeffs.assign(3, Field<LorentzVector>(size));
  p.coeffs_u.assign(3, Field<LorentzVector>(size, LorentzVector::Zero(patch.n + 2)));
  p.coeffs_v = p.coeffs_u;
  for (std::size_t k = 0; k < size; ++k) {
    const LorentzJet& j = patch.jet[k];
    const LorentzVector& N = patch.normal_frame[k].front();
    const double H = patch.H[k], Hu = patch.H_u[k], Hv = patch.H_v[k];
    const double k1 = patch.k1[k], k2 = patch.k2[k];
    const double alpha = 0.5 * patch.L[k] * ww - c.C;
    const double delta = -(0.5 * patch.M[k] + c.A);

    p.coeffs[0][k] = c.B * w;
    p.coeffs[1][k] = alpha * j.F - Hu * j.Fu + Hv * j.Fv + delta * N + 0.5 * patch.L[k] * w;
    p.coeffs[2][k] = H * j.F + N;

    p.coeffs_u[1][k] = 0.5 * ww * L_u[k] * j.F + alpha * j.Fu - patch.H_uu[k] * j.Fu - Hu * j.Fuu +
                       patch.H_uv[k] * j.Fv + Hv * j.Fuv - 0.5 * M_u[k] * N - delta * k1 * j.Fu +
                       0.5 * L_u[k] * w;
    p.coeffs_v[1][k] = 0.5 * ww * L_v[k] * j.F + alpha * j.Fv - patch.H_uv[k] * j.Fu - Hu * j.Fuv +
                       patch.H_vv[k] * j.Fv + Hv * j.Fvv - 0.5 * M_v[k] * N - delta * k2 * j.Fv +
                       0.5 * L_v[k] * w;
    p.coeffs_u[2][k] = Hu * j.F + (H - k1) * j.Fu;
    p.coeffs_v[2][k] = Hv * j.F + (H - k2) * j.Fv;
  }
  EtaOptions opts;
  opts.allow_umbilic = true;
  p.residual = ladder_residual(p, build_eta(patch, opts));
  return p;
}

double check_darboux_bianchi(const SurfacePatch& patch, const ClassConstants& c) {
  require_codim_one(patch, "check_darboux_bianchi");
  const double K = patch.w.curvature();
  double worst = 0.0;
  for (std::size_t k = 0; k < patch.H.size(); ++k) {
    const double e2 = std::exp(2.0 * patch.theta[k]);
    const double M = patch.M[k], L = patch.L[k];
    const double r = e2 * (patch.H_u[k] * patch.H_u[k] + patch.H_v[k] * patch.H_v[k]) + 0.25 * M * M + c.A * M -
                     2.0 * c.B * patch.H[k] + c.C * L + c.D + 0.25 * L * L * K;
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

namespace {

// The two type-2 equations at a node, as residual values.
std::pair<double, double> type2_equations(const SurfacePatch& p, std::size_t k, double A, double B, double C,
                                          double ww) {
  const double em2 = std::exp(-2.0 * p.theta[k]);
  const double mixed = p.theta_u[k] * p.H_u[k] - p.theta_v[k] * p.H_v[k];
  const double e1 = p.H_uu[k] + mixed - 0.5 * p.M[k] * p.k1[k] - A * p.k1[k] - B * em2 + C - 0.5 * p.L[k] * ww;
  const double e2 = p.H_vv[k] - mixed + 0.5 * p.M[k] * p.k2[k] + A * p.k2[k] - B * em2 - C + 0.5 * p.L[k] * ww;
  return {e1, e2};
}

}  // namespace

double check_type2_pde(const SurfacePatch& patch, double A, double B, double C, const SpaceForm& w) {
  require_codim_one(patch, "check_type2_pde");
  const double ww = inner(w.w, w.w);
  double worst = 0.0;
  for (std::size_t k = 0; k < patch.H.size(); ++k) {
    const auto [e1, e2] = type2_equations(patch, k, A, B, C, ww);
    worst = std::max({worst, std::abs(e1), std::abs(e2)});
  }
  return worst;
}

double check_codazzi(const SurfacePatch& patch) {
  require_codim_one(patch, "check_codazzi");
  double worst = 0.0;
  for (std::size_t k = 0; k < patch.H.size(); ++k)
    worst = std::max(worst, std::abs(patch.H_uv[k] + patch.theta_u[k] * patch.H_v[k] +
                                     patch.theta_v[k] * patch.H_u[k]));
  return worst;
}

bool converse_excluded(const SurfacePatch& patch) {
  require_codim_one(patch, "converse_excluded");
  double scale = 0.0;
  for (std::size_t k = 0; k < patch.H.size(); ++k)
    scale = std::max(scale, std::abs(patch.H_u[k] * patch.H_v[k]));
  const double cut = 1e-8 * (1.0 + scale);
  std::size_t vanishing = 0;
  for (std::size_t k = 0; k < patch.H.size(); ++k)
    if (std::abs(patch.H_u[k] * patch.H_v[k]) <= cut) ++vanishing;
  return static_cast<double>(vanishing) > 0.05 * static_cast<double>(patch.H.size());
}

ClassFit fit_class_constants(const SurfacePatch& patch, const SpaceForm& w) {
  require_codim_one(patch, "fit_class_constants");
  const auto size = patch.H.size();
  const double ww = inner(w.w, w.w);
  // Residual = base + J (A, B, C); stack both equations over all nodes.
  Eigen::MatrixXd J(2 * static_cast<Eigen::Index>(size), 3);
  Eigen::VectorXd base(2 * static_cast<Eigen::Index>(size));
  for (std::size_t k = 0; k < size; ++k) {
    const auto r = static_cast<Eigen::Index>(2 * k);
    const auto [b1, b2] = type2_equations(patch, k, 0.0, 0.0, 0.0, ww);
    const double em2 = std::exp(-2.0 * patch.theta[k]);
    base(r) = b1;
    base(r + 1) = b2;
    J.row(r) << -patch.k1[k], -em2, 1.0;
    J.row(r + 1) << patch.k2[k], -em2, -1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  const double cut = 1e-9 * std::max(1.0, s(0));
  svd.setThreshold(cut / std::max(1e-300, s(0)));
  const Eigen::Vector3d abc = svd.solve(-base);

  ClassFit fit;
  fit.consts.w = w;
  fit.consts.A = abc(0);
  fit.consts.B = abc(1);
  fit.consts.C = abc(2);
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) <= cut) ++fit.null_dimension;

  // D is the value making the Bianchi-Darboux expression vanish on average.
  ClassConstants trial = fit.consts;
  trial.D = 0.0;
  const double K = w.curvature();
  double sum = 0.0;
  for (std::size_t k = 0; k < size; ++k) {
    const double e2 = std::exp(2.0 * patch.theta[k]);
    const double M = patch.M[k], L = patch.L[k];
    sum += e2 * (patch.H_u[k] * patch.H_u[k] + patch.H_v[k] * patch.H_v[k]) + 0.25 * M * M + trial.A * M -
           2.0 * trial.B * patch.H[k] + trial.C * L + 0.25 * L * L * K;
  }
  fit.consts.D = -sum / static_cast<double>(size);
  fit.pde_residual = check_type2_pde(patch, fit.consts.A, fit.consts.B, fit.consts.C, w);
  fit.bianchi_residual = check_darboux_bianchi(patch, fit.consts);
  return fit;
}

StructureReport verify_structure(const PolynomialSection& p, const SurfacePatch& patch) {
  if (p.grid.size() != patch.grid.size() || p.dim() != patch.n + 2)
    throw GeometryError("conserved quantity and patch live on different grids");
  StructureReport r;
  const auto& p0 = p.coeffs.front();
  for (const auto& x : p0) r.constant_term = std::max(r.constant_term, (x - p0.front()).norm());

  const auto [du, dv] = derivatives(p);
  const auto d = static_cast<std::size_t>(p.degree);
  for (std::size_t k = 0; k < p0.size(); ++k) {
    const LorentzJet& j = patch.jet[k];
    const LorentzVector& pd = p.coeffs[d][k];
    const double em = std::exp(-patch.theta[k]);
    for (const LorentzVector& x : {LorentzVector(j.F), LorentzVector(em * j.Fu), LorentzVector(em * j.Fv),
                                   LorentzVector(em * em * (j.Fuu + j.Fvv))})
      r.orthogonality = std::max(r.orthogonality, std::abs(inner(pd, x)));
    std::vector<LorentzVector> perp{j.F};
    for (const auto& nrm : patch.normal_frame[k]) perp.push_back(nrm);
    for (const auto& y : perp)
      r.parallelism = std::max({r.parallelism, std::abs(inner(du[d][k], y)), std::abs(inner(dv[d][k], y))});
  }
  return r;
}

}  // namespace isothermic
