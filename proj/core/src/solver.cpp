#include "isothermic/conserved.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace isothermic {

namespace {

using lorentz::inner;

// Generator of the block ladder dY = -A Y, Y = (p_0, .., p_d), where A has
// eta_X in every sub-diagonal block.
struct LadderGenerator final : LinearGenerator {
  const EtaField& eta;
  int d;
  LadderGenerator(const EtaField& e, int degree) : eta(e), d(degree) {}

  Eigen::MatrixXd assemble(const Bivector& b) const {
    const int N = eta.dim();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero((d + 1) * N, (d + 1) * N);
    for (int k = 1; k <= d; ++k) a.block(k * N, (k - 1) * N, N, N) = -b.m;
    return a;
  }
  Eigen::MatrixXd value(int node, int axis) const override {
    const auto k = static_cast<std::size_t>(node);
    return assemble(axis == 0 ? eta.eta_u[k] : eta.eta_v[k]);
  }
  Eigen::MatrixXd derivative(int node, int axis) const override {
    const auto k = static_cast<std::size_t>(node);
    return assemble(axis == 0 ? eta.eta_u_du[k] : eta.eta_v_dv[k]);
  }
};

void check_degree(int d) {
  if (d < 0 || d > 4) throw GeometryError("conserved-quantity degree must lie in 0..4");
}

struct Assembly {
  Field<Eigen::MatrixXd> phi;  // Y(node) = phi[node] x
  Eigen::MatrixXd R;           // triangular factor of the weighted constraint matrix
};

double eta_row_weight(const CoordGrid& g) { return 1.0 / std::sqrt(2.0 * g.size()); }

double edge_row_weight(const IntegrationTree& tree) {
  const auto count = tree.cross.size() + tree.wrap.size();
  return count == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(count));
}

// Reduces a tall block to its K x K triangular factor.
Eigen::MatrixXd triangular_factor(const Eigen::MatrixXd& rows, int K) {
  if (rows.rows() == 0) return Eigen::MatrixXd::Zero(K, K);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(rows);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(K, K);
  const auto m = std::min<Eigen::Index>(rows.rows(), K);
  r.topRows(m) = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  return r;
}

Assembly assemble(const EtaField& eta, int d, const SolverOptions& opt) {
  const CoordGrid& g = eta.grid;
  const int N = eta.dim();
  const int K = (d + 1) * N;
  const LadderGenerator gen(eta, d);
  const int base = opt.base_node;
  if (base < 0 || base >= g.size()) throw GeometryError("base node outside the grid");
  const int i0 = base % g.nu, j0 = base / g.nu;

  Assembly out;
  out.phi.assign(static_cast<std::size_t>(g.size()), Eigen::MatrixXd());
  out.phi[static_cast<std::size_t>(base)] = Eigen::MatrixXd::Identity(K, K);
  auto step = [&](int from, int to) {
    const Edge e = make_edge(g, from, to);
    out.phi[static_cast<std::size_t>(to)] = step_matrix(gen, g, e, opt.order) * out.phi[static_cast<std::size_t>(from)];
  };
  // Same spanning tree as integration_tree: the base column, then each row.
  for (int j = j0; j + 1 < g.nv; ++j) step(g.index(i0, j), g.index(i0, j + 1));
  for (int j = j0; j > 0; --j) step(g.index(i0, j), g.index(i0, j - 1));
  parallel_for(g.nv, [&](int j) {
    for (int i = i0; i + 1 < g.nu; ++i) step(g.index(i, j), g.index(i + 1, j));
    for (int i = i0; i > 0; --i) step(g.index(i, j), g.index(i - 1, j));
  });

  const IntegrationTree tree = integration_tree(g, base);
  const double we = eta_row_weight(g);
  const double wc = edge_row_weight(tree);
  std::vector<std::vector<Edge>> edges_by_row(static_cast<std::size_t>(g.nv));
  for (const auto* list : {&tree.cross, &tree.wrap})
    for (const Edge& e : *list) edges_by_row[static_cast<std::size_t>(e.from / g.nu)].push_back(e);

  Field<Eigen::MatrixXd> factors(static_cast<std::size_t>(g.nv));
  parallel_for(g.nv, [&](int j) {
    const auto& edges = edges_by_row[static_cast<std::size_t>(j)];
    Eigen::MatrixXd rows(2 * g.nu * N + static_cast<Eigen::Index>(edges.size()) * K, K);
    Eigen::Index r = 0;
    for (int i = 0; i < g.nu; ++i) {
      const auto k = static_cast<std::size_t>(g.index(i, j));
      const Eigen::MatrixXd top = out.phi[k].bottomRows(N);
      rows.middleRows(r, N) = we * eta.eta_u[k].m * top;
      rows.middleRows(r + N, N) = we * eta.eta_v[k].m * top;
      r += 2 * N;
    }
    for (const Edge& e : edges) {
      rows.middleRows(r, K) = wc * (out.phi[static_cast<std::size_t>(e.to)] -
                                    step_matrix(gen, g, e, opt.order) * out.phi[static_cast<std::size_t>(e.from)]);
      r += K;
    }
    factors[static_cast<std::size_t>(j)] = triangular_factor(rows, K);
  });
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(factors.size()) * K, K);
  for (std::size_t j = 0; j < factors.size(); ++j) stacked.middleRows(static_cast<Eigen::Index>(j) * K, K) = factors[j];
  out.R = triangular_factor(stacked, K);
  return out;
}

// Coefficient of t^m of (p(t), p(t)) at one node.
std::vector<double> node_spectrum(const PolynomialSection& p, std::size_t node) {
  const int d = p.degree;
  std::vector<double> c(static_cast<std::size_t>(2 * d + 1), 0.0);
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j <= d; ++j)
      c[static_cast<std::size_t>(i + j)] +=
          inner(p.coeffs[static_cast<std::size_t>(i)][node], p.coeffs[static_cast<std::size_t>(j)][node]);
  return c;
}

std::vector<double> mean_spectrum(const PolynomialSection& p) {
  std::vector<double> c(static_cast<std::size_t>(2 * p.degree + 1), 0.0);
  for (std::size_t k = 0; k < static_cast<std::size_t>(p.grid.size()); ++k) {
    const auto nc = node_spectrum(p, k);
    for (std::size_t m = 0; m < c.size(); ++m) c[m] += nc[m];
  }
  for (double& x : c) x /= static_cast<double>(p.grid.size());
  return c;
}

}  // namespace

std::vector<double> conserved_singular_values(const EtaField& eta, int d, const SolverOptions& options) {
  check_degree(d);
  const Assembly a = assemble(eta, d, options);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.R);
  const Eigen::VectorXd s = svd.singularValues();
  std::vector<double> out(s.data(), s.data() + s.size());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PolynomialSection> solve_conserved(const EtaField& eta, int d, const SolverOptions& options) {
  check_degree(d);
  if (eta.closedness > 10.0 * options.tol) throw GeometryError("eta not closed enough to integrate");
  const Assembly a = assemble(eta, d, options);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.R, Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  const int N = eta.dim();
  const auto size = static_cast<std::size_t>(eta.grid.size());

  std::vector<PolynomialSection> out;
  for (Eigen::Index c = s.size() - 1; c >= 0; --c) {
    if (s(c) >= options.tol) continue;
    Eigen::VectorXd x = svd.matrixV().col(c);
    Eigen::Index arg = 0;
    x.cwiseAbs().maxCoeff(&arg);
    if (x(arg) < 0) x = -x;

    PolynomialSection p;
    p.degree = d;
    p.n = eta.n;
    p.grid = eta.grid;
    p.coeffs.assign(static_cast<std::size_t>(d + 1), Field<LorentzVector>(size));
    for (std::size_t k = 0; k < size; ++k) {
      const Eigen::VectorXd y = a.phi[k] * x;
      for (int b = 0; b <= d; ++b) p.coeffs[static_cast<std::size_t>(b)][k] = y.segment(b * N, N);
    }
    const auto spec = mean_spectrum(p);
    double largest = 0.0;
    for (double v : spec) largest = std::max(largest, std::abs(v));
    const double lead = std::abs(spec.back());
    const double norm = lead > 1e-8 ? lead : largest;
    if (norm > 0.0) p = p.scaled(1.0 / std::sqrt(norm));
    p.singular_value = s(c);
    p.residual = ladder_residual(p, eta);
    out.push_back(std::move(p));
  }
  return out;
}

double constraint_residual(const PolynomialSection& p, const EtaField& eta, int order) {
  const CoordGrid& g = eta.grid;
  if (p.grid.size() != g.size() || p.dim() != eta.dim())
    throw GeometryError("conserved quantity and eta live on different grids");
  const int d = p.degree;
  const int N = eta.dim();
  const int K = (d + 1) * N;
  const LadderGenerator gen(eta, d);
  auto stacked = [&](std::size_t node) {
    Eigen::VectorXd y(K);
    for (int b = 0; b <= d; ++b) y.segment(b * N, N) = p.coeffs[static_cast<std::size_t>(b)][node];
    return y;
  };
  const IntegrationTree tree = integration_tree(g, 0);
  const double we = eta_row_weight(g);
  const double wc = edge_row_weight(tree);
  double sum = 0.0;
  for (std::size_t k = 0; k < static_cast<std::size_t>(g.size()); ++k) {
    const LorentzVector& top = p.coeffs[static_cast<std::size_t>(d)][k];
    sum += (we * eta.eta_u[k].apply(top)).squaredNorm() + (we * eta.eta_v[k].apply(top)).squaredNorm();
  }
  for (const auto* list : {&tree.cross, &tree.wrap})
    for (const Edge& e : *list) {
      const Eigen::VectorXd r = stacked(static_cast<std::size_t>(e.to)) -
                                step_matrix(gen, g, e, order) * stacked(static_cast<std::size_t>(e.from));
      sum += (wc * r).squaredNorm();
    }
  // The solver's unknowns are the coefficients at its base node.
  const double scale = stacked(0).norm();
  return scale > 0.0 ? std::sqrt(sum) / scale : 0.0;
}

double SpectralPolynomial::value(double t) const {
  double v = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * t + *it;
  return v;
}

bool SpectralPolynomial::has_repeated_root() const {
  if (zero_multiplicity > 1) return true;
  return std::any_of(roots.begin(), roots.end(), [](const SpectralRoot& r) { return r.multiplicity > 1; });
}

std::vector<SpectralRoot> real_roots(const std::vector<double>& coeffs, double cluster_tol, int* complex_count) {
  std::vector<double> c = coeffs;
  double largest = 0.0;
  for (double x : c) largest = std::max(largest, std::abs(x));
  if (complex_count) *complex_count = 0;
  if (largest == 0.0) return {};
  while (c.size() > 1 && std::abs(c.back()) <= 1e-12 * largest) c.pop_back();
  const int deg = static_cast<int>(c.size()) - 1;
  if (deg < 1) return {};

  // Exact zero roots first, then the companion matrix of the rest.
  std::size_t low = 0;
  while (low < c.size() - 1 && std::abs(c[low]) <= 1e-14 * largest) ++low;
  std::vector<double> vals(low, 0.0);
  const int rdeg = deg - static_cast<int>(low);
  if (rdeg > 0) {
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(rdeg, rdeg);
    const double top = c.back();
    for (int i = 0; i < rdeg; ++i) comp(0, i) = -c[static_cast<std::size_t>(deg - 1 - i)] / top;
    for (int i = 1; i < rdeg; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const std::complex<double> z = es.eigenvalues()(i);
      if (std::abs(z.imag()) <= cluster_tol * (1.0 + std::abs(z.real()))) {
        vals.push_back(z.real());
      } else if (complex_count) {
        ++*complex_count;
      }
    }
  }
  std::sort(vals.begin(), vals.end());
  std::vector<SpectralRoot> out;
  std::vector<double> members;
  auto flush = [&] {
    if (members.empty()) return;
    double m = 0.0;
    for (double x : members) m += x;
    out.push_back({m / static_cast<double>(members.size()), static_cast<int>(members.size())});
    members.clear();
  };
  for (double v : vals) {
    if (!members.empty() && std::abs(v - members.back()) > cluster_tol * (1.0 + std::abs(v))) flush();
    members.push_back(v);
  }
  flush();
  for (auto& r : out)
    if (std::abs(r.value) <= cluster_tol) r.value = 0.0;
  return out;
}

SpectralPolynomial spectral_polynomial(const PolynomialSection& p) {
  SpectralPolynomial sp;
  sp.coeffs = mean_spectrum(p);
  for (std::size_t k = 0; k < static_cast<std::size_t>(p.grid.size()); ++k) {
    const auto nc = node_spectrum(p, k);
    for (std::size_t m = 0; m < nc.size(); ++m)
      sp.constancy_residual = std::max(sp.constancy_residual, std::abs(nc[m] - sp.coeffs[m]));
  }
  // A coefficient perturbation eps splits a double root by about sqrt(eps),
  // so the clustering tolerance tracks the measured non-constancy.
  double largest = 0.0;
  for (double x : sp.coeffs) largest = std::max(largest, std::abs(x));
  const double rel = largest > 0.0 ? sp.constancy_residual / largest : 0.0;
  sp.cluster_tolerance = std::max(1e-6, 4.0 * std::sqrt(rel));
  for (const auto& r : real_roots(sp.coeffs, sp.cluster_tolerance, &sp.complex_roots)) {
    if (r.value == 0.0) {
      sp.zero_multiplicity += r.multiplicity;
    } else {
      sp.roots.push_back(r);
    }
  }
  return sp;
}

PolynomialSection normalize_type2(const PolynomialSection& p, const SurfacePatch& patch) {
  if (p.degree != 2 || !patch.codimension_one()) throw GeometryError("normalize_type2 needs a degree-2 quantity on a codimension-1 patch");
  // p_2 = mu (H F + N) up to noise: mu = (p_2, N) since (F, N) = 0.
  double mu = 0.0;
  for (std::size_t k = 0; k < p.coeffs[2].size(); ++k) mu += inner(p.coeffs[2][k], patch.normal_frame[k].front());
  mu /= static_cast<double>(p.coeffs[2].size());
  if (std::abs(mu) < 1e-12) throw GeometryError("leading coefficient has no normal component");
  return p.scaled(1.0 / mu);
}

ClassConstants class_from_quantity(const PolynomialSection& p, const SurfacePatch& patch, double eta_scale) {
  if (!(eta_scale > 0.0)) throw GeometryError("class_from_quantity needs a positive eta scale");
  // p(t) conserved for d + t s eta_1 means p(t / s) is conserved for d + t eta_1.
  PolynomialSection unit = p;
  for (std::size_t c = 0; c < unit.coeffs.size(); ++c) {
    const double f = std::pow(eta_scale, -static_cast<double>(c));
    for (auto& x : unit.coeffs[c]) x *= f;
  }
  unit.coeffs_u.clear();
  unit.coeffs_v.clear();
  const PolynomialSection q = normalize_type2(unit, patch);
  const auto c = mean_spectrum(q);
  const LorentzVector& w = patch.w.w;
  ClassConstants out;
  out.w = patch.w;
  out.A = -0.5 * c[3];
  out.D = out.A * out.A - c[2];
  const double bc = 0.5 * c[1];
  // p_0 = B w: least squares in the coordinate norm, valid for null w too.
  out.B = q.coeffs[0].front().dot(w) / w.dot(w);
  if (std::abs(out.B) > 1e-8) {
    out.C = bc / out.B;
  } else {
    double s = 0.0;
    for (const auto& x : q.coeffs[1]) s += inner(x, w);
    out.C = s / static_cast<double>(q.coeffs[1].size());
  }
  return out;
}

}  // namespace isothermic
