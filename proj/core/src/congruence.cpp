#include "isothermic/congruence.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>

namespace isothermic {

namespace {

using lorentz::inner;

std::string node_name(const CoordGrid& g, int k) {
  return "(" + std::to_string(k % g.nu) + ", " + std::to_string(k / g.nu) + ")";
}

// Coefficients c with pi(x) = b c for the orthoprojection onto span(b).
Eigen::VectorXd projection_coefficients(const Eigen::MatrixXd& b, const Eigen::MatrixXd& J, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd gram = b.transpose() * J * b;
  return gram.fullPivLu().solve(b.transpose() * J * x);
}

Eigen::MatrixXd normalized_columns(Eigen::MatrixXd b) {
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    const double s = b.col(c).norm();
    if (s > 0.0) b.col(c) /= s;
  }
  return b;
}

// Connection matrices of the orthoprojected derivative in the frame b:
// pi(d(b c)) = b (dc + A c).
Eigen::MatrixXd connection_matrix(const Eigen::MatrixXd& b, const Eigen::MatrixXd& db, const Eigen::MatrixXd& J) {
  const Eigen::MatrixXd gram = b.transpose() * J * b;
  return gram.fullPivLu().solve(b.transpose() * J * db);
}

double flatness_of(const CoordGrid& g, const Field<Eigen::MatrixXd>& basis, const Eigen::MatrixXd& J) {
  const auto bu = fd::d_u(g, basis);
  const auto bv = fd::d_v(g, basis);
  Field<Eigen::MatrixXd> au(basis.size()), av(basis.size());
  for (std::size_t k = 0; k < basis.size(); ++k) {
    au[k] = connection_matrix(basis[k], bu[k], J);
    av[k] = connection_matrix(basis[k], bv[k], J);
  }
  const auto av_u = fd::d_u(g, av);
  const auto au_v = fd::d_v(g, au);
  double worst = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const Eigen::MatrixXd r = av_u[k] - au_v[k] + au[k] * av[k] - av[k] * au[k];
    worst = std::max(worst, r.norm());
  }
  return worst;
}

Eigen::MatrixXd orthonormal_span(const Eigen::MatrixXd& b) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normalized_columns(b));
  const Eigen::Index r = qr.rank();
  return Eigen::MatrixXd(qr.householderQ()).leftCols(r);
}

void require_same_nodes(const CoordGrid& a, const CoordGrid& b) {
  if (a.nu != b.nu || a.nv != b.nv) throw GeometryError("congruences live on different grids");
}

// Least-squares (beta, q) in (F1, X) = beta (F2, X) + q (w, X) for X in
// Lambda^(1); q is dropped when w is empty.
struct Split {
  double beta = 0.0, q = 0.0, misfit = 0.0;
};

Split split_against_tangent(const LorentzJet& jet, const LorentzVector& F1, const LorentzVector& F2,
                            const LorentzVector* w) {
  const LorentzVector xs[3] = {jet.F, jet.Fu, jet.Fv};
  const int cols = w ? 2 : 1;
  Eigen::MatrixXd a(3, cols);
  Eigen::Vector3d rhs;
  for (int r = 0; r < 3; ++r) {
    const double scale = 1.0 / std::max(xs[r].norm(), 1e-300);
    a(r, 0) = inner(F2, xs[r]) * scale;
    if (w) a(r, 1) = inner(*w, xs[r]) * scale;
    rhs[r] = inner(F1, xs[r]) * scale;
  }
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(rhs);
  Split s;
  s.beta = x[0];
  if (w) s.q = x[1];
  s.misfit = (a * x - rhs).norm() / std::max(rhs.norm(), 1e-300);
  return s;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double spread_of(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x - mean));
  return s;
}

PolynomialSection empty_section(const CoordGrid& g, int n, int degree) {
  PolynomialSection p;
  p.degree = degree;
  p.n = n;
  p.grid = g;
  p.coeffs.assign(static_cast<std::size_t>(degree + 1), Field<LorentzVector>(static_cast<std::size_t>(g.size())));
  return p;
}

// Fourth-order first derivative along one axis: five-point central
// stencil inside, one-sided stencils at open boundaries.
template <class T>
Field<T> d4(const CoordGrid& g, const Field<T>& a, int axis) {
  const int count = axis == 0 ? g.nu : g.nv;
  const double h = axis == 0 ? g.hu : g.hv;
  const bool periodic = axis == 0 ? g.periodic_u : g.periodic_v;
  Field<T> out(a.size());
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      const int k = axis == 0 ? i : j;
      auto at = [&](int l) -> const T& {
        if (periodic) l = ((l % count) + count) % count;
        return a[static_cast<std::size_t>(axis == 0 ? g.index(l, j) : g.index(i, l))];
      };
      T d;
      if (periodic || (k >= 2 && k <= count - 3))
        d = (at(k - 2) - 8.0 * at(k - 1) + 8.0 * at(k + 1) - at(k + 2)) / (12.0 * h);
      else if (k == 0)
        d = (-25.0 * at(0) + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4)) / (12.0 * h);
      else if (k == 1)
        d = (-3.0 * at(0) - 10.0 * at(1) + 18.0 * at(2) - 6.0 * at(3) + at(4)) / (12.0 * h);
      else if (k == count - 2)
        d = (3.0 * at(count - 1) + 10.0 * at(count - 2) - 18.0 * at(count - 3) + 6.0 * at(count - 4) -
             at(count - 5)) / (12.0 * h);
      else
        d = (25.0 * at(count - 1) - 48.0 * at(count - 2) + 36.0 * at(count - 3) - 16.0 * at(count - 4) +
             3.0 * at(count - 5)) / (12.0 * h);
      out[static_cast<std::size_t>(g.index(i, j))] = d;
    }
  return out;
}

}  // namespace

SignatureCount signature(const Eigen::MatrixXd& b, double tol) {
  const Eigen::MatrixXd nb = normalized_columns(b);
  const Eigen::MatrixXd gram = nb.transpose() * lorentz::gram(static_cast<int>(b.rows()) - 2) * nb;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  SignatureCount c;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > tol * scale)
      ++c.positive;
    else if (ev[i] < -tol * scale)
      ++c.negative;
    else
      ++c.zero;
  }
  return c;
}

void verify_signature(const SphereCongruence& c, double tol) {
  for (int k = 0; k < c.grid.size(); ++k) {
    const auto s = signature(c.basis[static_cast<std::size_t>(k)], tol);
    if (s.positive != c.positive || s.negative != c.negative || s.zero != 0)
      throw GeometryError("sphere congruence has signature (" + std::to_string(s.positive) + ", " +
                          std::to_string(s.negative) + ") with " + std::to_string(s.zero) +
                          " degenerate directions at node " + node_name(c.grid, k) + ", expected (" +
                          std::to_string(c.positive) + ", " + std::to_string(c.negative) + ")");
  }
}

Eigen::MatrixXd orthoprojector(const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd J = lorentz::gram(static_cast<int>(b.rows()) - 2);
  const Eigen::MatrixXd gram = b.transpose() * J * b;
  return b * gram.fullPivLu().solve(b.transpose() * J);
}

SphereCongruence central_sphere_congruence(const SurfacePatch& patch) {
  SphereCongruence c;
  c.grid = patch.grid;
  c.n = patch.n;
  c.positive = 3;
  c.negative = 1;
  c.basis.resize(static_cast<std::size_t>(patch.grid.size()));
  for (int k = 0; k < patch.grid.size(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const LorentzJet& j = patch.jet[ks];
    Eigen::MatrixXd b(patch.n + 2, 4);
    b.col(0) = j.F;
    b.col(1) = j.Fu;
    b.col(2) = j.Fv;
    b.col(3) = std::exp(-2.0 * patch.theta[ks]) * (j.Fuu + j.Fvv);
    c.basis[ks] = b;
  }
  verify_signature(c);
  return c;
}

SphericalSystem spherical_system(const DarbouxPair& pair) {
  const SurfacePatch& patch = pair.source;
  const int n = patch.n;
  const Eigen::MatrixXd J = lorentz::gram(n);
  SphericalSystem out;
  SphereCongruence& c = out.congruence;
  c.grid = patch.grid;
  c.n = n;
  c.positive = n - 1;
  c.negative = 1;
  c.basis.resize(static_cast<std::size_t>(patch.grid.size()));
  for (int k = 0; k < patch.grid.size(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const auto& normals = patch.normal_frame[ks];
    Eigen::MatrixXd b(n + 2, n);
    b.col(0) = patch.F(k);
    for (std::size_t a = 0; a < normals.size(); ++a) b.col(static_cast<Eigen::Index>(a) + 1) = normals[a];
    b.col(n - 1) = pair.G[ks];
    c.basis[ks] = b;
  }
  verify_signature(c);

  for (int k = 0; k < patch.grid.size(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Eigen::MatrixXd& b = c.basis[ks];
    for (const LorentzVector* x : {&patch.jet[ks].Fu, &patch.jet[ks].Fv}) {
      Eigen::VectorXd coeff = projection_coefficients(b, J, *x);
      coeff[0] = 0.0;
      out.orthogonality = std::max(out.orthogonality, (b * coeff).norm() / x->norm());
    }
  }
  Field<Eigen::MatrixXd> unit(c.basis.size());
  for (std::size_t k = 0; k < unit.size(); ++k) unit[k] = normalized_columns(c.basis[k]);
  out.flatness = flatness_of(c.grid, unit, J);
  return out;
}

SphereCongruence sphere_planes(const SphereCongruence& c, const LorentzVector& w) {
  const Eigen::MatrixXd J = lorentz::gram(c.n);
  SphereCongruence p;
  p.grid = c.grid;
  p.n = c.n;
  p.positive = c.positive + 1;
  p.negative = c.negative;
  p.basis.resize(c.basis.size());
  for (int k = 0; k < c.grid.size(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Eigen::MatrixXd& b = c.basis[ks];
    const LorentzVector off = w - b * projection_coefficients(b, J, w);
    if (off.norm() <= 1e-8 * w.norm())
      throw GeometryError("w lies in the spherical system at node " + node_name(c.grid, k));
    Eigen::MatrixXd e(b.rows(), b.cols() + 1);
    e << b, w;
    p.basis[ks] = e;
  }
  verify_signature(p);
  return p;
}

double coincidence_test(const SphereCongruence& a, const SphereCongruence& b) {
  require_same_nodes(a.grid, b.grid);
  if (a.rank() != b.rank()) throw GeometryError("congruences of different rank cannot coincide");
  Field<double> gap(static_cast<std::size_t>(a.grid.size()), 0.0);
  parallel_for(a.grid.size(), [&](int k) {
    const auto ks = static_cast<std::size_t>(k);
    const Eigen::MatrixXd qa = orthonormal_span(a.basis[ks]);
    const Eigen::MatrixXd qb = orthonormal_span(b.basis[ks]);
    if (qa.cols() != qb.cols()) {
      gap[ks] = 1.0;
      return;
    }
    const Eigen::MatrixXd d = qa * qa.transpose() - qb * qb.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d, Eigen::EigenvaluesOnly);
    gap[ks] = es.eigenvalues().cwiseAbs().maxCoeff();
  });
  return *std::max_element(gap.begin(), gap.end());
}

SpherePlaneCoincidence sphere_plane_coincidence(const DarbouxPair& pair1, const DarbouxPair& pair2,
                                                const LorentzVector& w, double threshold) {
  require_same_nodes(pair1.source.grid, pair2.source.grid);
  if (pair1.m == pair2.m) throw GeometryError("sphere-plane coincidence needs distinct parameters");
  const SphereCongruence p1 = sphere_planes(spherical_system(pair1).congruence, w);
  const SphereCongruence p2 = sphere_planes(spherical_system(pair2).congruence, w);
  SpherePlaneCoincidence out;
  out.gap = coincidence_test(p1, p2);

  const SurfacePatch& patch = pair1.source;
  const int N = patch.grid.size();
  for (int k = 0; k < N; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Eigen::MatrixXd proj = orthoprojector(p1.basis[ks]);
    for (const LorentzVector* x : {&patch.jet[ks].Fu, &patch.jet[ks].Fv})
      if ((*x - proj * *x).norm() <= 1e-6 * x->norm()) {
        ++out.principal_violations;
        break;
      }
  }
  if (out.gap > threshold) return out;

  std::vector<double> betas(static_cast<std::size_t>(N)), qs(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Split s = split_against_tangent(patch.jet[ks], pair1.G[ks], pair2.G[ks], &w);
    betas[ks] = s.beta;
    qs[ks] = s.q;
    out.decomposition = std::max(out.decomposition, s.misfit);
  }
  out.beta = mean_of(betas);
  out.q = mean_of(qs);
  out.beta_spread = spread_of(betas, out.beta);
  out.q_spread = spread_of(qs, out.q);

  // Interpolation through p(0), p(m1), p(m2).
  const double m1 = pair1.m, m2 = pair2.m;
  PolynomialSection p = empty_section(patch.grid, patch.n, 2);
  const double l0[3] = {1.0, -(m1 + m2) / (m1 * m2), 1.0 / (m1 * m2)};
  const double l1[3] = {0.0, -m2 / (m1 * (m1 - m2)), 1.0 / (m1 * (m1 - m2))};
  const double l2[3] = {0.0, -m1 / (m2 * (m2 - m1)), 1.0 / (m2 * (m2 - m1))};
  const LorentzVector a0 = (m1 * m2 * out.q / (m2 - m1)) * w;
  for (int k = 0; k < N; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const LorentzVector a1 = m1 * pair1.G[ks];
    const LorentzVector a2 = m2 * out.beta * pair2.G[ks];
    for (int i = 0; i < 3; ++i) p.coeffs[static_cast<std::size_t>(i)][ks] = l0[i] * a0 + l1[i] * a1 + l2[i] * a2;
  }
  p.residual = ladder_residual(p, pair1.source_eta);
  out.constraint = constraint_residual(p, pair1.source_eta);
  out.quantity = std::move(p);
  return out;
}

SphericalCoincidence spherical_coincidence_type1(const DarbouxPair& pair1, const DarbouxPair& pair2,
                                                 double threshold) {
  require_same_nodes(pair1.source.grid, pair2.source.grid);
  if (pair1.m == pair2.m) throw GeometryError("spherical coincidence needs distinct parameters");
  SphericalCoincidence out;
  out.gap = coincidence_test(spherical_system(pair1).congruence, spherical_system(pair2).congruence);
  if (out.gap > threshold) return out;

  const SurfacePatch& patch = pair1.source;
  const int N = patch.grid.size();
  std::vector<double> betas(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    betas[ks] = split_against_tangent(patch.jet[ks], pair1.G[ks], pair2.G[ks], nullptr).beta;
  }
  out.beta = mean_of(betas);
  out.beta_spread = spread_of(betas, out.beta);

  const double m1 = pair1.m, m2 = pair2.m;
  PolynomialSection p = empty_section(patch.grid, patch.n, 1);
  for (int k = 0; k < N; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const LorentzVector p1 = (pair1.G[ks] - out.beta * pair2.G[ks]) / (m1 - m2);
    p.coeffs[1][ks] = p1;
    p.coeffs[0][ks] = pair1.G[ks] - m1 * p1;
  }
  p.residual = ladder_residual(p, pair1.source_eta);
  out.constraint = constraint_residual(p, pair1.source_eta);
  out.quantity = std::move(p);
  return out;
}

QuadricModel envelope_quadric(const PolynomialSection& p_in, const SurfacePatch& patch, const EtaField& eta, double m,
                              const LorentzVector& w, int order) {
  if (p_in.degree != 2) throw GeometryError("the quadric envelope needs a degree-2 quantity");
  if (!patch.codimension_one()) throw GeometryError("the quadric envelope is implemented in codimension 1");
  if (m == 0.0) throw GeometryError("the quadric envelope needs a non-zero root");
  if (std::abs(inner(w, w)) > 1e-10 * w.squaredNorm()) throw GeometryError("w is not null");
  require_same_nodes(p_in.grid, patch.grid);

  const CoordGrid& g = patch.grid;
  const int N = g.size();
  const int n = patch.n;
  const Eigen::MatrixXd J = lorentz::gram(n);

  const SpectralPolynomial spec0 = spectral_polynomial(p_in);
  const double lead = spec0.coeffs.back();
  if (!(lead > 0.0)) throw GeometryError("p_2 is not space-like");
  const PolynomialSection p = p_in.scaled(1.0 / std::sqrt(lead));
  const SpectralPolynomial spec = spectral_polynomial(p);
  if (std::abs(spec.value(m)) > 1e-6 * (1.0 + std::abs(m)) * (1.0 + m * m) * (1.0 + m * m))
    throw GeometryError("m is not a root of the spectral polynomial");

  QuadricModel q;
  q.m = m;

  // p_0 = B w.
  {
    std::vector<double> bs(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) bs[static_cast<std::size_t>(k)] = p.coeffs[0][static_cast<std::size_t>(k)].dot(w) / w.squaredNorm();
    q.B = mean_of(bs);
    double off = 0.0;
    for (int k = 0; k < N; ++k) off = std::max(off, (p.coeffs[0][static_cast<std::size_t>(k)] - q.B * w).norm());
    if (off > 1e-6 * std::max(1.0, std::abs(q.B) * w.norm())) throw GeometryError("p_0 is not a constant multiple of w");
  }

  const double p21 = spec.coeffs[3] / 2.0;
  const double p10 = spec.coeffs[1] / 2.0;
  q.c_aa = -(m * m + m * p21);
  q.c_ab = m * p10 - std::pow(m, 4) - std::pow(m, 3) * p21;
  q.c_ac = -1.0;
  q.c_bc = -m * m;
  q.c_a = q.B;
  {
    const double n21 = inner(p.coeffs[2][0], p.coeffs[1][0]);
    const double n10 = inner(p.coeffs[1][0], p.coeffs[0][0]);
    const double aa = -(m * m + m * n21);
    const double ab = m * n10 - std::pow(m, 4) - std::pow(m, 3) * n21;
    q.coefficient_drift = std::max(std::abs(aa - q.c_aa), std::abs(ab - q.c_ab));
  }

  const auto sz = static_cast<std::size_t>(N);
  q.alpha.assign(sz, 0.0);
  q.beta.assign(sz, 0.0);
  q.gamma.assign(sz, 0.0);
  q.s.assign(sz, 0.0);
  q.G.assign(sz, LorentzVector::Zero(n + 2));
  q.g.assign(sz, Eigen::Vector3d::Zero());
  Field<Eigen::MatrixXd> basis(sz);
  Field<LorentzVector> G1(sz);
  std::vector<char> excluded(sz, 0);

  for (int k = 0; k < N; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const LorentzVector& F = patch.F(k);
    const LorentzVector& p2 = p.coeffs[2][ks];
    const LorentzVector pm = p.evaluate(k, m);
    if (pm.norm() <= 1e-12 || lorentz::line_angle(pm, F) <= 1e-6)
      throw GeometryError("p(m) meets the surface at node " + node_name(g, k));
    Eigen::MatrixXd c(n + 2, 3);
    c << F, pm, p2;
    const Eigen::MatrixXd proj = orthoprojector(c);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n + 2, n + 2);
    Eigen::MatrixXd mat(2 * (n + 2), 2);
    const Eigen::MatrixXd* etas[2] = {&eta.eta_u[ks].m, &eta.eta_v[ks].m};
    for (int x = 0; x < 2; ++x) {
      const LorentzVector dp2 = -(*etas[x]) * p.coeffs[1][ks];
      const LorentzVector dpm = -m * (*etas[x]) * pm;
      mat.block(x * (n + 2), 0, n + 2, 1) = (eye - proj) * dp2;
      mat.block(x * (n + 2), 1, n + 2, 1) = (eye - proj) * dpm;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const Eigen::Vector2d ab0 = svd.matrixV().col(1);
    if (sv[0] > 0.0) q.envelope_residual = std::max(q.envelope_residual, sv[1] / sv[0]);

    const double denom = ab0[0] * inner(p2, w) + ab0[1] * inner(pm, w);
    const double size = std::abs(ab0[0]) * std::abs(inner(p2, w)) + std::abs(ab0[1]) * std::abs(inner(pm, w));
    if (std::abs(denom) <= 1e-8 * std::max(size, 1e-300)) {
      excluded[ks] = 1;
      q.excluded.push_back(k);
    }
    const double a = -ab0[0] / denom, b = -ab0[1] / denom;
    const double p2pm = inner(p2, pm);
    q.alpha[ks] = a;
    q.beta[ks] = b;
    q.gamma[ks] = -a * p2pm;
    G1[ks] = a * p2 + b * pm;
    q.s[ks] = inner(G1[ks], G1[ks]) / 2.0;
    q.G[ks] = G1[ks] + q.s[ks] * w;

    const LorentzVector Fn = F / (-inner(F, pm));
    Eigen::MatrixXd frame(n + 2, 3);
    frame << p2pm * Fn + p2, pm, Fn;
    basis[ks] = frame;
  }

  // Psi comes from parallel transport along the tree: an arbitrary basis of
  // C is carried with the orthoprojected connection, starting from the frame
  // (Z, p(m), F) at the base node. The relation residual therefore also
  // tests that this frame is parallel everywhere.
  // The carrier derivatives are exact: F from the jet, p(m) and p_2 from the
  // ladder relations dp(m) = -m eta p(m) and dp_2 = -eta p_1.
  Field<Eigen::MatrixXd> carrier(sz);
  Field<Eigen::MatrixXd> au(sz), av(sz);
  for (std::size_t k = 0; k < sz; ++k) {
    const LorentzJet& jet = patch.jet[k];
    const LorentzVector& pm = basis[k].col(1);
    const LorentzVector& p1 = p.coeffs[1][k];
    const LorentzVector& p2 = p.coeffs[2][k];
    Eigen::MatrixXd c(n + 2, 3), cu(n + 2, 3), cv(n + 2, 3);
    c << jet.F, pm, p2;
    cu << jet.Fu, -m * eta.eta_u[k].m * pm, -eta.eta_u[k].m * p1;
    cv << jet.Fv, -m * eta.eta_v[k].m * pm, -eta.eta_v[k].m * p1;
    for (int col = 0; col < 3; ++col) {
      const double r = c.col(col).norm();
      const LorentzVector unit = c.col(col) / r;
      cu.col(col) = (cu.col(col) - unit * unit.dot(cu.col(col))) / r;
      cv.col(col) = (cv.col(col) - unit * unit.dot(cv.col(col))) / r;
      c.col(col) = unit;
    }
    carrier[k] = c;
    au[k] = connection_matrix(c, cu, J);
    av[k] = connection_matrix(c, cv, J);
  }
  const auto au_u = fd::d_u(g, au);
  const auto av_v = fd::d_v(g, av);
  struct Generator final : LinearGenerator {
    const Field<Eigen::MatrixXd>*a[2], *da[2];
    Eigen::MatrixXd value(int node, int axis) const override { return -(*a[axis])[static_cast<std::size_t>(node)]; }
    Eigen::MatrixXd derivative(int node, int axis) const override {
      return -(*da[axis])[static_cast<std::size_t>(node)];
    }
  } gen;
  gen.a[0] = &au;
  gen.a[1] = &av;
  gen.da[0] = &au_u;
  gen.da[1] = &av_v;
  auto step = [&](const Edge& e) -> Eigen::Matrix3d { return step_matrix(gen, g, e, order); };
  Field<Eigen::Matrix3d> coords(sz);
  for (int c = 0; c < 3; ++c) coords[0].col(c) = projection_coefficients(carrier[0], J, basis[0].col(c));
  const IntegrationTree tree = integration_tree(g, 0);
  for (const Edge& e : tree.tree)
    coords[static_cast<std::size_t>(e.to)] = step(e) * coords[static_cast<std::size_t>(e.from)];
  for (const Edge& e : tree.cross) {
    const Eigen::Matrix3d predicted = step(e) * coords[static_cast<std::size_t>(e.from)];
    q.frame_consistency = std::max(q.frame_consistency, (predicted - coords[static_cast<std::size_t>(e.to)]).norm());
  }

  q.frame.resize(sz);
  for (std::size_t k = 0; k < sz; ++k) {
    const Eigen::MatrixXd e = carrier[k] * coords[k];
    q.frame[k] = e;
    const Eigen::Matrix3d gram = e.transpose() * J * e;
    q.g[k] = gram.fullPivLu().solve(e.transpose() * J * G1[k]);
  }
  const Eigen::Matrix3d metric = basis[0].transpose() * J * basis[0];

  for (std::size_t k = 0; k < sz; ++k) {
    if (excluded[k]) continue;
    const Eigen::Vector3d& x = q.g[k];
    const double scale = 1.0 + x.squaredNorm();
    q.relation_residual = std::max(q.relation_residual, std::abs(q.relation(x)) / scale);
    const LorentzVector pm = p.evaluate(static_cast<int>(k), m);
    q.definition_residual =
        std::max(q.definition_residual, std::abs(x[2] + x[0] * inner(p.coeffs[2][k], pm)) / std::sqrt(scale));
  }

  const auto Gu = d4(g, q.G, 0);
  const auto Gv = d4(g, q.G, 1);
  const auto gu = d4(g, q.g, 0);
  const auto gv = d4(g, q.g, 1);
  for (std::size_t k = 0; k < sz; ++k) {
    if (excluded[k]) continue;
    const double e1 = inner(Gu[k], Gu[k]) - gu[k].dot(metric * gu[k]);
    const double e2 = inner(Gu[k], Gv[k]) - gu[k].dot(metric * gv[k]);
    const double e3 = inner(Gv[k], Gv[k]) - gv[k].dot(metric * gv[k]);
    const double scale =
        1.0 + Gu[k].squaredNorm() + Gv[k].squaredNorm() + gu[k].squaredNorm() + gv[k].squaredNorm();
    q.metric_residual = std::max({q.metric_residual, std::abs(e1) / scale, std::abs(e2) / scale, std::abs(e3) / scale});
  }
  return q;
}

void write_quadric_curve_csv(const std::filesystem::path& path, const QuadricModel& q) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  out << "alpha,beta,gamma\n";
  std::vector<char> excluded(q.g.size(), 0);
  for (int k : q.excluded) excluded[static_cast<std::size_t>(k)] = 1;
  for (std::size_t k = 0; k < q.g.size(); ++k) {
    if (excluded[k]) {
      out << "nan,nan,nan\n";
      continue;
    }
    out << q.g[k][0] << ',' << q.g[k][1] << ',' << q.g[k][2] << '\n';
  }
}

void write_quadric_coefficients_csv(const std::filesystem::path& path, const QuadricModel& q) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  out << "monomial,coefficient\n";
  out << "alpha^2," << q.c_aa << '\n';
  out << "alpha*beta," << q.c_ab << '\n';
  out << "alpha*gamma," << q.c_ac << '\n';
  out << "beta*gamma," << q.c_bc << '\n';
  out << "alpha," << q.c_a << '\n';
}

}  // namespace isothermic
