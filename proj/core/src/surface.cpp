#include "isothermic/surface.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace isothermic {

LorentzJet rescale_jet(const LorentzJet& x, const LorentzVector& w) {
  using lorentz::inner;
  const double c = -inner(x.F, w);
  if (std::abs(c) <= 1e-14 * x.F.norm() * w.norm()) throw DegeneracyError("point at infinity of the space form");
  const double cu = -inner(x.Fu, w);
  const double cv = -inner(x.Fv, w);
  const double cuu = -inner(x.Fuu, w);
  const double cuv = -inner(x.Fuv, w);
  const double cvv = -inner(x.Fvv, w);
  const double l = 1.0 / c;
  const double c2 = c * c;
  const double c3 = c2 * c;
  const double lu = -cu / c2;
  const double lv = -cv / c2;
  const double luu = -cuu / c2 + 2.0 * cu * cu / c3;
  const double luv = -cuv / c2 + 2.0 * cu * cv / c3;
  const double lvv = -cvv / c2 + 2.0 * cv * cv / c3;
  LorentzJet out;
  out.F = l * x.F;
  out.Fu = lu * x.F + l * x.Fu;
  out.Fv = lv * x.F + l * x.Fv;
  out.Fuu = luu * x.F + 2.0 * lu * x.Fu + l * x.Fuu;
  out.Fuv = luv * x.F + lu * x.Fv + lv * x.Fu + l * x.Fuv;
  out.Fvv = lvv * x.F + 2.0 * lv * x.Fv + l * x.Fvv;
  return out;
}

LorentzJet lift_jet(const EuclideanJet& e) {
  const int n = static_cast<int>(e.f.size());
  auto make = [n](const Eigen::VectorXd& x, double a0, double ainf) {
    LorentzVector out(n + 2);
    out(0) = a0;
    out.segment(1, n) = x;
    out(n + 1) = ainf;
    return out;
  };
  LorentzJet j;
  j.F = make(e.f, 1.0, 0.5 * e.f.squaredNorm());
  j.Fu = make(e.fu, 0.0, e.f.dot(e.fu));
  j.Fv = make(e.fv, 0.0, e.f.dot(e.fv));
  j.Fuu = make(e.fuu, 0.0, e.fu.squaredNorm() + e.f.dot(e.fuu));
  j.Fuv = make(e.fuv, 0.0, e.fu.dot(e.fv) + e.f.dot(e.fuv));
  j.Fvv = make(e.fvv, 0.0, e.fv.squaredNorm() + e.f.dot(e.fvv));
  return j;
}

EuclideanJet euclidean_jet(const LorentzJet& x) {
  const int n = lorentz::euclidean_dim(x.F);
  const LorentzJet y = rescale_jet(x, lorentz::vinf(n));
  return {y.F.segment(1, n), y.Fu.segment(1, n), y.Fv.segment(1, n),
          y.Fuu.segment(1, n), y.Fuv.segment(1, n), y.Fvv.segment(1, n)};
}

namespace {

std::string node_name(const CoordGrid& g, int node) {
  std::ostringstream os;
  os << "(i=" << node % g.nu << ", j=" << node / g.nu << ")";
  return os.str();
}

// Orthonormal basis of {F, F_u, F_v, w}^perp, which is positive definite.
std::vector<LorentzVector> normal_space(const LorentzJet& j, const LorentzVector& w) {
  const int dim = static_cast<int>(j.F.size());
  const int n = dim - 2;
  const Eigen::MatrixXd g = lorentz::gram(n);
  Eigen::MatrixXd c(4, dim);
  c.row(0) = (g * j.F).transpose();
  c.row(1) = (g * j.Fu).transpose();
  c.row(2) = (g * j.Fv).transpose();
  c.row(3) = (g * w).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeFullV);
  std::vector<LorentzVector> frame;
  for (int k = 4; k < dim; ++k) {
    LorentzVector v = svd.matrixV().col(k);
    for (const auto& b : frame) v -= lorentz::inner(v, b) * b;
    const double nn = lorentz::inner(v, v);
    if (!(nn > 0.0)) throw GeometryError("normal space is not spacelike");
    frame.push_back(v / std::sqrt(nn));
  }
  return frame;
}

double orientation_det(const LorentzJet& j, const LorentzVector& nrm, const LorentzVector& w) {
  Eigen::MatrixXd m(5, 5);
  m << j.F, j.Fu, j.Fv, nrm, w;
  return m.determinant();
}

LorentzVector normal_part(const LorentzVector& x, const std::vector<LorentzVector>& frame) {
  LorentzVector out = LorentzVector::Zero(x.size());
  for (const auto& b : frame) out += lorentz::inner(x, b) * b;
  return out;
}

SurfacePatch assemble_impl(const CoordGrid& grid, Field<LorentzJet> raw, const SpaceForm& w, double umbilic_slack) {
  grid.validate();
  if (static_cast<int>(raw.size()) != grid.size()) throw GeometryError("jet field size does not match grid");
  const int n = lorentz::euclidean_dim(raw.front().F);
  if (n < 2) throw GeometryError("ambient dimension must be at least 2");
  if (lorentz::euclidean_dim(w.w) != n) throw GeometryError("space form dimension does not match the patch");

  SurfacePatch p;
  p.grid = grid;
  p.n = n;
  p.w = w;
  const auto size = static_cast<std::size_t>(grid.size());
  p.jet.resize(size);
  p.f.resize(size);
  p.theta.resize(size);
  p.theta_u.resize(size);
  p.theta_v.resize(size);
  p.normal_frame.resize(size);
  p.mean_curvature.resize(size);
  Field<double> conformality(size), curvature_line(size), membership(size), umbilic(size);
  const bool scalar = n == 3;
  if (scalar) {
    for (auto* field : {&p.k1, &p.k2, &p.H, &p.L, &p.M}) field->resize(size);
  }

  parallel_for(grid.nv, [&](int row) {
    for (int i = 0; i < grid.nu; ++i) {
      const int node = grid.index(i, row);
      const auto k = static_cast<std::size_t>(node);
      LorentzJet j = rescale_jet(raw[k], w.w);
      using lorentz::inner;
      const double guu = inner(j.Fu, j.Fu);
      const double gvv = inner(j.Fv, j.Fv);
      const double guv = inner(j.Fu, j.Fv);
      const double e2 = 0.5 * (guu + gvv);
      if (!(e2 > 1e-24) || !std::isfinite(e2))
        throw GeometryError("patch is not immersed at node " + node_name(grid, node));
      p.theta[k] = 0.5 * std::log(e2);
      p.theta_u[k] = 0.5 * (inner(j.Fuu, j.Fu) + inner(j.Fuv, j.Fv)) / e2;
      p.theta_v[k] = 0.5 * (inner(j.Fuv, j.Fu) + inner(j.Fvv, j.Fv)) / e2;
      conformality[k] = std::max(std::abs(guu - gvv), std::abs(guv)) / e2;
      membership[k] = std::max(std::abs(inner(j.F, j.F)), std::abs(inner(j.F, w.w) + 1.0));

      auto frame = normal_space(j, w.w);
      if (scalar && orientation_det(j, frame.front(), w.w) > 0.0) frame.front() = -frame.front();
      const LorentzVector lap = normal_part(j.Fuu + j.Fvv, frame);
      p.mean_curvature[k] = 0.5 * lap / e2;
      curvature_line[k] = normal_part(j.Fuv, frame).norm() / e2;
      umbilic[k] = normal_part(j.Fuu - j.Fvv, frame).norm() / e2;
      if (scalar) {
        const LorentzVector& nrm = frame.front();
        p.k1[k] = inner(j.Fuu, nrm) / e2;
        p.k2[k] = inner(j.Fvv, nrm) / e2;
        p.H[k] = 0.5 * (p.k1[k] + p.k2[k]);
        p.L[k] = e2 * (p.k1[k] - p.k2[k]);
        p.M[k] = -p.H[k] * p.L[k];
        curvature_line[k] = std::abs(inner(j.Fuv, nrm)) / e2;
        umbilic[k] = std::abs(p.k1[k] - p.k2[k]);
      }
      p.f[k] = lorentz::stereo_project(j.F);
      p.normal_frame[k] = std::move(frame);
      p.jet[k] = std::move(j);
    }
  });

  auto max_of = [](const Field<double>& a) { return *std::max_element(a.begin(), a.end()); };
  p.diag.conformality = max_of(conformality);
  p.diag.curvature_line = max_of(curvature_line);
  p.diag.membership = max_of(membership);
  p.diag.umbilic_max = max_of(umbilic);
  p.diag.umbilic_min = *std::min_element(umbilic.begin(), umbilic.end());

  double curvature_scale = 0.0;
  for (const auto& h : p.mean_curvature) curvature_scale = std::max(curvature_scale, h.norm());
  const double umbilic_tol = kUmbilicTolerance * (1.0 + curvature_scale) + umbilic_slack * (1.0 + curvature_scale);
  p.diag.umbilic_nodes = static_cast<int>(
      std::count_if(umbilic.begin(), umbilic.end(), [&](double x) { return x <= umbilic_tol; }));
  p.diag.totally_umbilic = p.diag.umbilic_nodes == grid.size();

  if (scalar) {
    p.H_u = fd::d_u(grid, p.H);
    p.H_v = fd::d_v(grid, p.H);
    p.H_uu = fd::d_uu(grid, p.H);
    p.H_vv = fd::d_vv(grid, p.H);
    p.H_uv = fd::d_u(grid, p.H_v);
    double codazzi = 0.0;
    for (std::size_t k = 0; k < size; ++k)
      codazzi = std::max(codazzi, std::abs(p.H_uv[k] + p.theta_u[k] * p.H_v[k] + p.theta_v[k] * p.H_u[k]));
    p.diag.codazzi = codazzi;
  }
  return p;
}

}  // namespace

SurfacePatch assemble_patch(const CoordGrid& grid, Field<LorentzJet> raw, const SpaceForm& w) {
  return assemble_impl(grid, std::move(raw), w, 0.0);
}

SurfacePatch assemble_patch(const CoordGrid& grid, const Field<EuclideanJet>& jets, const SpaceForm& w) {
  Field<LorentzJet> raw(jets.size());
  for (std::size_t k = 0; k < jets.size(); ++k) raw[k] = lift_jet(jets[k]);
  return assemble_impl(grid, std::move(raw), w, 0.0);
}

SurfacePatch compute_fundamental(const CoordGrid& grid, const Field<Eigen::VectorXd>& f, const SpaceForm& w) {
  grid.validate();
  if (static_cast<int>(f.size()) != grid.size()) throw GeometryError("immersion field size does not match grid");
  for (const auto& x : f)
    if (!x.allFinite()) throw GeometryError("non-finite immersion values");
  const auto fu = fd::d_u(grid, f);
  const auto fv = fd::d_v(grid, f);
  const auto fuu = fd::d_uu(grid, f);
  const auto fvv = fd::d_vv(grid, f);
  const auto fuv = fd::d_u(grid, fv);
  Field<LorentzJet> raw(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) raw[k] = lift_jet({f[k], fu[k], fv[k], fuu[k], fuv[k], fvv[k]});
  // Umbilic detection has to tolerate the O(h^2) truncation error.
  const double h = std::max(grid.hu, grid.hv);
  return assemble_impl(grid, std::move(raw), w, 10.0 * h * h);
}

Field<EuclideanJet> euclidean_jets(const SurfacePatch& patch) {
  Field<EuclideanJet> out(patch.jet.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = euclidean_jet(patch.jet[k]);
  return out;
}

// ---------------------------------------------------------------------------

EtaField build_eta(const SurfacePatch& patch, const EtaOptions& options) {
  if (!options.allow_umbilic) {
    if (patch.diag.totally_umbilic)
      throw GeometryError("eta not canonically determined: patch is totally umbilic");
    if (patch.diag.umbilic_nodes > 0)
      throw GeometryError("patch contains umbilic points; eta is only defined away from them");
  }
  if (options.scale == 0.0 || !std::isfinite(options.scale)) throw GeometryError("eta scale must be non-zero");

  EtaField e;
  e.grid = patch.grid;
  e.n = patch.n;
  e.scale = options.scale;
  const auto size = patch.jet.size();
  for (auto* field : {&e.eta_u, &e.eta_v, &e.eta_u_du, &e.eta_u_dv, &e.eta_v_du, &e.eta_v_dv}) field->resize(size);
  e.F.resize(size);
  e.Fu.resize(size);
  e.Fv.resize(size);
  e.Q.resize(size);
  Field<double> annihilation(size), reassembly(size);

  parallel_for(patch.grid.nv, [&](int row) {
    for (int i = 0; i < patch.grid.nu; ++i) {
      const auto k = static_cast<std::size_t>(patch.grid.index(i, row));
      const LorentzJet& j = patch.jet[k];
      const double s = options.scale * std::exp(-2.0 * patch.theta[k]);
      const double tu = patch.theta_u[k];
      const double tv = patch.theta_v[k];
      const Bivector f_fu = Bivector::wedge(j.F, j.Fu);
      const Bivector f_fv = Bivector::wedge(j.F, j.Fv);
      const Bivector fu_fv = Bivector::wedge(j.Fu, j.Fv);
      const Bivector f_fuv = Bivector::wedge(j.F, j.Fuv);
      e.eta_u[k] = -s * f_fu;
      e.eta_v[k] = s * f_fv;
      e.eta_u_du[k] = -s * (-2.0 * tu * f_fu + Bivector::wedge(j.F, j.Fuu));
      e.eta_u_dv[k] = -s * (-2.0 * tv * f_fu - fu_fv + f_fuv);
      e.eta_v_du[k] = s * (-2.0 * tu * f_fv + fu_fv + f_fuv);
      e.eta_v_dv[k] = s * (-2.0 * tv * f_fv + Bivector::wedge(j.F, j.Fvv));
      e.F[k] = j.F;
      e.Fu[k] = j.Fu;
      e.Fv[k] = j.Fv;
      e.Q[k] << -s, 0.0, 0.0, s;

      const double fn = j.F.norm();
      annihilation[k] = std::max(e.eta_u[k].apply(j.F).norm() / (e.eta_u[k].m.norm() * fn),
                                 e.eta_v[k].apply(j.F).norm() / (e.eta_v[k].m.norm() * fn));
      const Eigen::Matrix2d& q = e.Q[k];
      const Bivector re_u = Bivector::wedge(j.F, q(0, 0) * j.Fu + q(1, 0) * j.Fv);
      const Bivector re_v = Bivector::wedge(j.F, q(0, 1) * j.Fu + q(1, 1) * j.Fv);
      reassembly[k] = std::max((re_u - e.eta_u[k]).m.cwiseAbs().maxCoeff(), (re_v - e.eta_v[k]).m.cwiseAbs().maxCoeff());
    }
  });
  e.annihilation = *std::max_element(annihilation.begin(), annihilation.end());
  e.reassembly = *std::max_element(reassembly.begin(), reassembly.end());
  e.closedness = eta_closedness(e);
  return e;
}

double cmc_eta_scale(const SurfacePatch& patch) {
  if (!patch.codimension_one()) throw GeometryError("cmc_eta_scale needs a codimension-1 patch");
  double sum = 0.0;
  for (double l : patch.L) sum += l;
  return 0.5 * sum / static_cast<double>(patch.L.size());
}

double eta_closedness(const EtaField& e) {
  const CoordGrid& g = e.grid;
  const int pu = g.periodic_u ? g.nu : g.nu - 1;
  const int pv = g.periodic_v ? g.nv : g.nv - 1;
  Field<double> row_max(static_cast<std::size_t>(pv), 0.0);
  // Hermite rule: int_0^h a = h/2 (a0 + a1) + h^2/12 (a0' - a1').
  auto edge = [](const Bivector& a0, const Bivector& a1, const Bivector& d0, const Bivector& d1, double h) {
    return Eigen::MatrixXd(0.5 * h * (a0.m + a1.m) + (h * h / 12.0) * (d0.m - d1.m));
  };
  parallel_for(pv, [&](int j) {
    const int j1 = (j + 1) % g.nv;
    for (int i = 0; i < pu; ++i) {
      const int i1 = (i + 1) % g.nu;
      const auto a = static_cast<std::size_t>(g.index(i, j));
      const auto b = static_cast<std::size_t>(g.index(i1, j));
      const auto c = static_cast<std::size_t>(g.index(i1, j1));
      const auto d = static_cast<std::size_t>(g.index(i, j1));
      const Eigen::MatrixXd loop = edge(e.eta_u[a], e.eta_u[b], e.eta_u_du[a], e.eta_u_du[b], g.hu) +
                                   edge(e.eta_v[b], e.eta_v[c], e.eta_v_dv[b], e.eta_v_dv[c], g.hv) -
                                   edge(e.eta_u[d], e.eta_u[c], e.eta_u_du[d], e.eta_u_du[c], g.hu) -
                                   edge(e.eta_v[a], e.eta_v[d], e.eta_v_dv[a], e.eta_v_dv[d], g.hv);
      row_max[static_cast<std::size_t>(j)] =
          std::max(row_max[static_cast<std::size_t>(j)], loop.norm() / (g.hu * g.hv));
    }
  });
  return row_max.empty() ? 0.0 : *std::max_element(row_max.begin(), row_max.end());
}

QuadraticDifferential quadratic_differential(const EtaField& eta, const SurfacePatch& patch) {
  QuadraticDifferential out;
  const auto size = eta.eta_u.size();
  out.q.resize(size);
  const LorentzVector& w = patch.w.w;
  double mean = 0.0;
  for (std::size_t k = 0; k < size; ++k) {
    const Bivector* x[2] = {&eta.eta_u[k], &eta.eta_v[k]};
    const LorentzVector* y[2] = {&eta.Fu[k], &eta.Fv[k]};
    // eta_X dF(Y) = q(X,Y)/2 F and (F, w) = -1.
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) out.q[k](a, b) = -2.0 * lorentz::inner(x[a]->apply(*y[b]), w);
    const Eigen::Matrix2d& q = out.q[k];
    out.trace_residual = std::max(out.trace_residual, std::abs(q(0, 0) + q(1, 1)) * std::exp(-2.0 * patch.theta[k]));
    out.off_diagonal = std::max({out.off_diagonal, std::abs(q(0, 1)), std::abs(q(1, 0))});
    mean += q(0, 0);
  }
  mean /= static_cast<double>(size);
  for (const auto& q : out.q) out.spread = std::max(out.spread, std::abs(q(0, 0) - mean));
  return out;
}

}  // namespace isothermic
