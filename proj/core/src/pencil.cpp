#include "isothermic/pencil.hpp"

#include <algorithm>
#include <cmath>

namespace isothermic {

IntegrationTree integration_tree(const CoordGrid& g, int base_node) {
  if (base_node < 0 || base_node >= g.size()) throw GeometryError("base node outside the grid");
  IntegrationTree tree;
  tree.base_node = base_node;
  const int i0 = base_node % g.nu;
  const int j0 = base_node / g.nu;
  auto add = [&](int i, int j, int axis, int step) {
    const int from = g.index(i, j);
    const int to = axis == 0 ? g.index(i + step, j) : g.index(i, j + step);
    tree.tree.push_back({from, to, axis, step});
  };
  for (int j = j0; j + 1 < g.nv; ++j) add(i0, j, 1, +1);
  for (int j = j0; j > 0; --j) add(i0, j, 1, -1);
  for (int j = 0; j < g.nv; ++j) {
    for (int i = i0; i + 1 < g.nu; ++i) add(i, j, 0, +1);
    for (int i = i0; i > 0; --i) add(i, j, 0, -1);
  }
  for (int j = 0; j + 1 < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i)
      if (i != i0) tree.cross.push_back({g.index(i, j), g.index(i, j + 1), 1, +1});
  if (g.periodic_u)
    for (int j = 0; j < g.nv; ++j) tree.wrap.push_back({g.index(g.nu - 1, j), g.index(0, j), 0, +1});
  if (g.periodic_v)
    for (int i = 0; i < g.nu; ++i) tree.wrap.push_back({g.index(i, g.nv - 1), g.index(i, 0), 1, +1});
  return tree;
}

Edge make_edge(const CoordGrid& g, int from, int to) {
  const int fi = from % g.nu, fj = from / g.nu;
  const int ti = to % g.nu, tj = to / g.nu;
  auto wrapped = [](int a, int b, int count, bool periodic) {
    if (b - a == 1 || b - a == -1) return b - a;
    if (periodic && a == count - 1 && b == 0) return 1;
    if (periodic && a == 0 && b == count - 1) return -1;
    return 0;
  };
  if (fj == tj) {
    const int step = wrapped(fi, ti, g.nu, g.periodic_u);
    if (step != 0) return {from, to, 0, step};
  }
  if (fi == ti) {
    const int step = wrapped(fj, tj, g.nv, g.periodic_v);
    if (step != 0) return {from, to, 1, step};
  }
  throw GeometryError("nodes are not adjacent");
}

Eigen::MatrixXd magnus_exponent(const Eigen::MatrixXd& a0, const Eigen::MatrixXd& a1, const Eigen::MatrixXd& da0,
                                const Eigen::MatrixXd& da1, double h, int order) {
  Eigen::MatrixXd omega = 0.5 * h * (a0 + a1);
  if (order >= 4) omega += (h * h / 12.0) * ((da0 - da1) + (a1 * a0 - a0 * a1));
  return omega;
}

namespace {

struct EtaGenerator final : LinearGenerator {
  const EtaField& eta;
  double t;
  EtaGenerator(const EtaField& e, double t_) : eta(e), t(t_) {}
  Eigen::MatrixXd value(int node, int axis) const override {
    const auto k = static_cast<std::size_t>(node);
    return -t * (axis == 0 ? eta.eta_u[k].m : eta.eta_v[k].m);
  }
  Eigen::MatrixXd derivative(int node, int axis) const override {
    const auto k = static_cast<std::size_t>(node);
    return -t * (axis == 0 ? eta.eta_u_du[k].m : eta.eta_v_dv[k].m);
  }
};

}  // namespace

Eigen::MatrixXd step_matrix(const LinearGenerator& gen, const CoordGrid& g, const Edge& e, int order) {
  const double h = e.step * (e.axis == 0 ? g.hu : g.hv);
  const Eigen::MatrixXd omega = magnus_exponent(gen.value(e.from, e.axis), gen.value(e.to, e.axis),
                                                gen.derivative(e.from, e.axis), gen.derivative(e.to, e.axis), h, order);
  return lorentz::expm(omega);
}

OrthogonalMap edge_transport(const EtaField& eta, const Edge& edge, double t, int order) {
  if (t == 0.0) return OrthogonalMap::identity(eta.n);
  const EtaGenerator gen(eta, t);
  const double h = edge.step * (edge.axis == 0 ? eta.grid.hu : eta.grid.hv);
  const Eigen::MatrixXd omega =
      magnus_exponent(gen.value(edge.from, edge.axis), gen.value(edge.to, edge.axis),
                      gen.derivative(edge.from, edge.axis), gen.derivative(edge.to, edge.axis), h, order);
  return lorentz::exp_bivector(Bivector{omega});
}

double holonomy_residual(const EtaField& eta, double t, int order) {
  const CoordGrid& g = eta.grid;
  const int pu = g.periodic_u ? g.nu : g.nu - 1;
  const int pv = g.periodic_v ? g.nv : g.nv - 1;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(eta.dim(), eta.dim());
  Field<double> row_max(static_cast<std::size_t>(pv), 0.0);
  parallel_for(pv, [&](int j) {
    const int j1 = (j + 1) % g.nv;
    for (int i = 0; i < pu; ++i) {
      const int i1 = (i + 1) % g.nu;
      const int a = g.index(i, j), b = g.index(i1, j), c = g.index(i1, j1), d = g.index(i, j1);
      const Eigen::MatrixXd loop = edge_transport(eta, {d, a, 1, -1}, t, order).m *
                                   edge_transport(eta, {c, d, 0, -1}, t, order).m *
                                   edge_transport(eta, {b, c, 1, +1}, t, order).m *
                                   edge_transport(eta, {a, b, 0, +1}, t, order).m;
      auto& slot = row_max[static_cast<std::size_t>(j)];
      slot = std::max(slot, (loop - id).norm() / (g.hu * g.hv));
    }
  });
  return row_max.empty() ? 0.0 : *std::max_element(row_max.begin(), row_max.end());
}

ParallelSection parallel_section(const TransportAtlas& atlas, double t, const LorentzVector& base_value,
                                 int base_node) {
  const EtaField& eta = *atlas.eta;
  if (base_value.size() != eta.dim()) throw GeometryError("section base value has the wrong dimension");
  lorentz::require_finite(base_value);
  const IntegrationTree tree = integration_tree(eta.grid, base_node);
  ParallelSection s;
  s.t = t;
  s.base_node = base_node;
  s.base_value = base_value;
  s.values.assign(static_cast<std::size_t>(eta.grid.size()), base_value);
  for (const Edge& e : tree.tree)
    s.values[static_cast<std::size_t>(e.to)] = atlas.transport(e, t).apply(s.values[static_cast<std::size_t>(e.from)]);

  auto mismatch = [&](const Edge& e) {
    return (s.values[static_cast<std::size_t>(e.to)] - atlas.transport(e, t).apply(s.values[static_cast<std::size_t>(e.from)]))
        .norm();
  };
  for (const Edge& e : tree.cross) s.consistency = std::max(s.consistency, mismatch(e));
  for (const Edge& e : tree.wrap) s.monodromy = std::max(s.monodromy, mismatch(e));
  const double n0 = lorentz::inner(base_value, base_value);
  for (const auto& v : s.values) s.norm_drift = std::max(s.norm_drift, std::abs(lorentz::inner(v, v) - n0));
  return s;
}

ParallelFrame parallel_frame(const TransportAtlas& atlas, double s, int base_node) {
  const EtaField& eta = *atlas.eta;
  const CoordGrid& g = eta.grid;
  const IntegrationTree tree = integration_tree(g, base_node);
  Field<Eigen::MatrixXd> inv(static_cast<std::size_t>(g.size()), Eigen::MatrixXd::Identity(eta.dim(), eta.dim()));
  for (const Edge& e : tree.tree)
    inv[static_cast<std::size_t>(e.to)] = atlas.transport(e, s).m * inv[static_cast<std::size_t>(e.from)];

  ParallelFrame out;
  out.s = s;
  out.phi.resize(inv.size());
  for (std::size_t k = 0; k < inv.size(); ++k) {
    out.phi[k] = OrthogonalMap{inv[k]}.inverse();
    out.orthogonality = std::max(out.orthogonality, out.phi[k].orthogonality_residual());
  }
  // d(Phi^{-1}) + s eta Phi^{-1} = 0 along both axes, central differences
  // at interior nodes.
  for (int j = 1; j + 1 < g.nv; ++j) {
    for (int i = 1; i + 1 < g.nu; ++i) {
      const auto k = static_cast<std::size_t>(g.index(i, j));
      const Eigen::MatrixXd du = (inv[static_cast<std::size_t>(g.index(i + 1, j))] - inv[static_cast<std::size_t>(g.index(i - 1, j))]) / (2.0 * g.hu);
      const Eigen::MatrixXd dv = (inv[static_cast<std::size_t>(g.index(i, j + 1))] - inv[static_cast<std::size_t>(g.index(i, j - 1))]) / (2.0 * g.hv);
      const double ru = (du + s * eta.eta_u[k].m * inv[k]).norm();
      const double rv = (dv + s * eta.eta_v[k].m * inv[k]).norm();
      out.gauge_residual = std::max({out.gauge_residual, ru, rv});
    }
  }
  return out;
}

}  // namespace isothermic
