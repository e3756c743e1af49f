#include "isothermic/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace isothermic {

namespace {

using lorentz::inner;

// Rectangle of nodes [i0, i0 + nu) x [j0, j0 + nv) of a grid. open_* drops
// the periodic identification in that direction.
struct Window {
  int i0 = 0, j0 = 0, nu = 0, nv = 0;
  bool open_u = false, open_v = false;
};

Window full_window(const CoordGrid& g) { return {0, 0, g.nu, g.nv, false, false}; }

bool is_identity(const Window& w, const CoordGrid& g) {
  return w.i0 == 0 && w.j0 == 0 && w.nu == g.nu && w.nv == g.nv && !w.open_u && !w.open_v;
}

CoordGrid window_grid(const CoordGrid& g, const Window& w) {
  CoordGrid out = g;
  out.nu = w.nu;
  out.nv = w.nv;
  out.u_min = g.u(w.i0);
  out.v_min = g.v(w.j0);
  out.periodic_u = g.periodic_u && w.nu == g.nu && !w.open_u;
  out.periodic_v = g.periodic_v && w.nv == g.nv && !w.open_v;
  return out;
}

template <class T>
Field<T> restrict_field(const Field<T>& a, const CoordGrid& g, const Window& w) {
  if (a.empty()) return a;
  Field<T> out;
  out.reserve(static_cast<std::size_t>(w.nu * w.nv));
  for (int j = 0; j < w.nv; ++j)
    for (int i = 0; i < w.nu; ++i) out.push_back(a[static_cast<std::size_t>(g.index(w.i0 + i, w.j0 + j))]);
  return out;
}

SurfacePatch restrict_patch(const SurfacePatch& patch, const Window& w) {
  if (is_identity(w, patch.grid)) return patch;
  auto out = assemble_patch(window_grid(patch.grid, w), restrict_field(patch.jet, patch.grid, w), patch.w);
  out.provenance = patch.provenance;
  return out;
}

PolynomialSection restrict_section(const PolynomialSection& p, const Window& w) {
  if (is_identity(w, p.grid)) return p;
  PolynomialSection out = p;
  out.grid = window_grid(p.grid, w);
  for (auto* group : {&out.coeffs, &out.coeffs_u, &out.coeffs_v})
    for (auto& field : *group) field = restrict_field(field, p.grid, w);
  return out;
}

// Largest rectangle of clean nodes (histogram method over rows).
Window largest_clean_rectangle(const CoordGrid& g, const std::vector<char>& clean) {
  Window best{0, 0, 0, 0, false, false};
  std::vector<int> height(static_cast<std::size_t>(g.nu), 0);
  for (int j = 0; j < g.nv; ++j) {
    for (int i = 0; i < g.nu; ++i) {
      auto& h = height[static_cast<std::size_t>(i)];
      h = clean[static_cast<std::size_t>(g.index(i, j))] ? h + 1 : 0;
    }
    std::vector<int> stack;
    for (int i = 0; i <= g.nu; ++i) {
      const int h = i < g.nu ? height[static_cast<std::size_t>(i)] : 0;
      while (!stack.empty() && height[static_cast<std::size_t>(stack.back())] >= h) {
        const int top = height[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        const int left = stack.empty() ? 0 : stack.back() + 1;
        const int width = i - left;
        // Prefer the larger area, then the squarer shape.
        const int area = width * top;
        const int best_area = best.nu * best.nv;
        if (area > best_area || (area == best_area && std::min(width, top) > std::min(best.nu, best.nv)))
          best = {left, j - top + 1, width, top, true, true};
      }
      stack.push_back(i);
    }
  }
  return best;
}

double coordinate_separation(const LorentzVector& F, const LorentzVector& G) {
  return std::abs(inner(F, G)) / (F.norm() * G.norm());
}

// Derivative of the projection x -> (x, b)/(a, b) a along X.
Eigen::MatrixXd projection(const LorentzVector& a, const LorentzVector& b, const Eigen::MatrixXd& gram) {
  return a * (gram * b).transpose() / inner(a, b);
}

Eigen::MatrixXd projection_derivative(const LorentzVector& a, const LorentzVector& b, const LorentzVector& da,
                                      const LorentzVector& db, const Eigen::MatrixXd& gram) {
  const double ab = inner(a, b);
  const double dab = inner(da, b) + inner(a, db);
  return (da * (gram * b).transpose() + a * (gram * db).transpose()) / ab -
         a * (gram * b).transpose() * dab / (ab * ab);
}

// Max over sample t and nodes of |t Gamma eta Gamma^{-1} - (d Gamma) Gamma^{-1} - t etahat| for
// Gamma = Gamma_L^Lhat(1 - t/m), with L = <F> from the source and Lhat = <G>.
double darboux_gauge_residual(const DarbouxPair& pair) {
  const int dim = pair.source_eta.dim();
  const Eigen::MatrixXd gram = lorentz::gram(dim - 2);
  double worst = 0.0;
  for (double t : residual_sample_parameters()) {
    const double c = 1.0 - t / pair.m;
    if (std::abs(c) < 0.05) continue;
    for (std::size_t k = 0; k < pair.G.size(); ++k) {
      const auto& jet = pair.source.jet[k];
      const LorentzVector& G = pair.G[k];
      const Eigen::MatrixXd P = projection(jet.F, G, gram);
      const Eigen::MatrixXd Ph = projection(G, jet.F, gram);
      const Eigen::MatrixXd gamma = Eigen::MatrixXd::Identity(dim, dim) + (c - 1.0) * Ph + (1.0 / c - 1.0) * P;
      const Eigen::MatrixXd gamma_inv = Eigen::MatrixXd::Identity(dim, dim) + (1.0 / c - 1.0) * Ph + (c - 1.0) * P;
      for (int axis = 0; axis < 2; ++axis) {
        const Bivector& eta = axis == 0 ? pair.source_eta.eta_u[k] : pair.source_eta.eta_v[k];
        const Bivector& etah = axis == 0 ? pair.target_eta.eta_u[k] : pair.target_eta.eta_v[k];
        const LorentzVector& dF = axis == 0 ? jet.Fu : jet.Fv;
        const LorentzVector dG = -pair.m * eta.apply(G);
        const Eigen::MatrixXd dgamma = (c - 1.0) * projection_derivative(G, jet.F, dG, dF, gram) +
                                       (1.0 / c - 1.0) * projection_derivative(jet.F, G, dF, dG, gram);
        const Eigen::MatrixXd r = t * gamma * eta.m * gamma_inv - dgamma * gamma_inv - t * etah.m;
        worst = std::max(worst, r.cwiseAbs().maxCoeff());
      }
    }
  }
  return worst;
}

// Builds the pair on a window of the source grid from a (d + m eta)-parallel
// section G given on the full grid.
DarbouxPair make_pair(const SurfacePatch& source, const EtaField& eta, double m, const Field<LorentzVector>& G_full,
                      const Window& win) {
  DarbouxPair pair;
  pair.m = m;
  pair.offset_i = win.i0;
  pair.offset_j = win.j0;
  pair.truncated = win.nu != source.grid.nu || win.nv != source.grid.nv;
  if (is_identity(win, source.grid)) {
    pair.source = source;
    pair.source_eta = eta;
  } else {
    pair.source = restrict_patch(source, win);
    pair.source_eta = build_eta(pair.source, {eta.scale, true});
  }
  pair.G = restrict_field(G_full, source.grid, win);
  const auto& grid = pair.source.grid;
  const auto& e = pair.source_eta;

  Field<LorentzJet> raw(static_cast<std::size_t>(grid.size()));
  pair.separation = 1.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const LorentzVector& G = pair.G[k];
    const Eigen::MatrixXd& eu = e.eta_u[k].m;
    const Eigen::MatrixXd& ev = e.eta_v[k].m;
    auto& jet = raw[k];
    jet.F = G;
    jet.Fu = -m * eu * G;
    jet.Fv = -m * ev * G;
    jet.Fuu = -m * e.eta_u_du[k].m * G + m * m * eu * eu * G;
    jet.Fuv = -m * e.eta_u_dv[k].m * G + m * m * eu * ev * G;
    jet.Fvv = -m * e.eta_v_dv[k].m * G + m * m * ev * ev * G;
    pair.nullity = std::max(pair.nullity, std::abs(inner(G, G)) / G.squaredNorm());
    pair.separation = std::min(pair.separation, coordinate_separation(pair.source.F(static_cast<int>(k)), G));
  }
  pair.target = assemble_patch(grid, std::move(raw), pair.source.w);
  pair.target.provenance = pair.source.provenance;
  pair.target_eta = build_eta(pair.target, {eta.scale, true});
  pair.gauge_residual = darboux_gauge_residual(pair);
  return pair;
}

// Finite-difference residual |dG + m eta G| / |G| of a section.
double parallel_defect(const CoordGrid& grid, const EtaField& eta, double m, const Field<LorentzVector>& G) {
  const auto gu = fd::d_u(grid, G);
  const auto gv = fd::d_v(grid, G);
  double worst = 0.0;
  for (std::size_t k = 0; k < G.size(); ++k) {
    const double ru = (gu[k] + m * eta.eta_u[k].apply(G[k])).norm();
    const double rv = (gv[k] + m * eta.eta_v[k].apply(G[k])).norm();
    worst = std::max(worst, std::max(ru, rv) / G[k].norm());
  }
  return worst;
}

Window clean_window(const SurfacePatch& source, const Field<LorentzVector>& G, double tol, bool open_periodic) {
  const auto& g = source.grid;
  std::vector<char> clean(static_cast<std::size_t>(g.size()));
  bool all_clean = true;
  for (int k = 0; k < g.size(); ++k) {
    clean[static_cast<std::size_t>(k)] = coordinate_separation(source.F(k), G[static_cast<std::size_t>(k)]) >= tol;
    all_clean = all_clean && clean[static_cast<std::size_t>(k)];
  }
  Window win = full_window(g);
  if (!all_clean) {
    win = largest_clean_rectangle(g, clean);
    if (win.nu < 8 || win.nv < 8) throw DegeneracyError("transform degenerates: the transformed line meets the surface");
  }
  win.open_u = win.open_u || open_periodic;
  win.open_v = win.open_v || open_periodic;
  return win;
}

void record_step(DarbouxPair& pair, const std::string& kind, std::vector<std::pair<std::string, double>> params) {
  params.insert(params.begin(), {"m", pair.m});
  pair.target.provenance.push_back({kind, std::move(params)});
}

}  // namespace

Eigen::MatrixXd gauge_gamma(const LorentzVector& F, const LorentzVector& G, double c) {
  return lorentz::gauge_map(F, G, c).m;
}

LineSplit split_lines(const LorentzVector& F, const LorentzVector& G, const LorentzVector& x) {
  const double fg = inner(F, G);
  LineSplit s;
  s.on_l = inner(x, G) / fg * F;
  s.on_lhat = inner(x, F) / fg * G;
  s.perp = x - s.on_l - s.on_lhat;
  return s;
}

LorentzVector darboux_seed(const SurfacePatch& patch, int node, double angle, double radius) {
  const auto& jet = patch.jet[static_cast<std::size_t>(node)];
  const double e = std::exp(-patch.theta[static_cast<std::size_t>(node)]);
  const LorentzVector& w = patch.w.w;
  // Null, pairs to -1 with F and is orthogonal to F_u, F_v since (F, w) = -1.
  const LorentzVector Fhat = w + 0.5 * inner(w, w) * jet.F;
  return jet.F + radius * e * (std::cos(angle) * jet.Fu + std::sin(angle) * jet.Fv) +
         0.5 * radius * radius * Fhat;
}

DarbouxPair darboux_transform(const SurfacePatch& source, const EtaField& eta, double m, const LorentzVector& seed,
                              const DarbouxOptions& options) {
  if (m == 0.0 || !std::isfinite(m)) throw GeometryError("Darboux parameter must be non-zero");
  if (!lorentz::is_null(seed, 1e-9 * std::max(1.0, seed.squaredNorm())))
    throw GeometryError("Darboux seed must be null");
  const auto atlas = make_atlas(eta, options.order);
  const auto section = parallel_section(atlas, m, seed, options.base_node);
  const double scale = section.values[static_cast<std::size_t>(options.base_node)].norm();
  const bool open = (source.grid.periodic_u || source.grid.periodic_v) && section.monodromy > 1e-6 * scale;
  const Window win = clean_window(source, section.values, options.degeneracy_tol, open);
  auto pair = make_pair(source, eta, m, section.values, win);
  pair.consistency = section.consistency / scale;
  std::vector<std::pair<std::string, double>> params{{"base_node", options.base_node}};
  for (Eigen::Index i = 0; i < seed.size(); ++i) params.emplace_back("seed_" + std::to_string(i), seed[i]);
  record_step(pair, "darboux", std::move(params));
  return pair;
}

DarbouxPair darboux_pair_from_section(const SurfacePatch& source, const EtaField& eta, double m,
                                      const Field<LorentzVector>& G, const DarbouxOptions& options) {
  if (m == 0.0 || !std::isfinite(m)) throw GeometryError("Darboux parameter must be non-zero");
  const Window win = clean_window(source, G, options.degeneracy_tol, false);
  auto pair = make_pair(source, eta, m, G, win);
  pair.consistency = parallel_defect(pair.source.grid, pair.source_eta, m, pair.G);
  return pair;
}

PolynomialSection restrict_to_pair(const PolynomialSection& p, const DarbouxPair& pair) {
  if (p.grid.size() == pair.source.grid.size() && pair.offset_i == 0 && pair.offset_j == 0) {
    PolynomialSection out = p;
    out.grid = pair.source.grid;
    return out;
  }
  Window w{pair.offset_i, pair.offset_j, pair.source.grid.nu, pair.source.grid.nv, true, true};
  auto out = restrict_section(p, w);
  out.grid = pair.source.grid;
  return out;
}

PolynomialSection promote_degree(const PolynomialSection& p, double m) {
  if (m == 0.0) throw GeometryError("promotion parameter must be non-zero");
  PolynomialSection q = p;
  q.degree = p.degree + 1;
  auto promote = [&](const std::vector<Field<LorentzVector>>& in, std::vector<Field<LorentzVector>>& out) {
    if (in.empty()) return;
    out.assign(in.size() + 1, Field<LorentzVector>(in.front().size()));
    for (std::size_t k = 0; k < out.size(); ++k)
      for (std::size_t node = 0; node < in.front().size(); ++node) {
        LorentzVector v = LorentzVector::Zero(p.dim());
        if (k < in.size()) v += in[k][node];
        if (k >= 1) v -= in[k - 1][node] / m;
        out[k][node] = v;
      }
  };
  promote(p.coeffs, q.coeffs);
  promote(p.coeffs_u, q.coeffs_u);
  promote(p.coeffs_v, q.coeffs_v);
  double factor = 0.0;
  for (double t : residual_sample_parameters()) factor = std::max(factor, std::abs(1.0 - t / m));
  q.residual = p.residual * factor;
  return q;
}

PolynomialSection divide_degree(const PolynomialSection& p, double m, double* remainder) {
  if (m == 0.0) throw GeometryError("division parameter must be non-zero");
  if (p.degree < 1) throw GeometryError("cannot lower the degree of a constant section");
  PolynomialSection q = p;
  q.degree = p.degree - 1;
  q.coeffs_u.clear();
  q.coeffs_v.clear();
  q.coeffs.assign(static_cast<std::size_t>(p.degree), Field<LorentzVector>(static_cast<std::size_t>(p.grid.size())));
  double worst = 0.0;
  const auto d = static_cast<std::size_t>(p.degree);
  for (std::size_t node = 0; node < static_cast<std::size_t>(p.grid.size()); ++node) {
    // p_k = q_k - q_{k-1}/m, solved upwards so that q(0) = p(0) exactly.
    q.coeffs[0][node] = p.coeffs[0][node];
    for (std::size_t k = 1; k < d; ++k) q.coeffs[k][node] = p.coeffs[k][node] + q.coeffs[k - 1][node] / m;
    // p(t) - (1 - t/m) q(t) = r t^d, so |p(m)| = |r| |m|^d.
    const LorentzVector r = p.coeffs[d][node] + q.coeffs[d - 1][node] / m;
    worst = std::max(worst, r.norm() * std::pow(std::abs(m), static_cast<double>(d)));
  }
  if (remainder) *remainder = worst;
  return q;
}

PolynomialSection gauge_conserved(const PolynomialSection& p_in, const DarbouxPair& pair, double tol) {
  const PolynomialSection p = restrict_to_pair(p_in, pair);
  if (p.dim() != pair.source_eta.dim()) throw GeometryError("conserved quantity and transform differ in dimension");
  const double m = pair.m;
  const auto d = static_cast<std::size_t>(p.degree);
  const auto nodes = static_cast<std::size_t>(p.grid.size());

  double scale = 0.0;
  for (const auto& c : p.coeffs)
    for (const auto& x : c) scale = std::max(scale, x.norm());
  if (scale == 0.0) throw GeometryError("conserved quantity vanishes");

  // (p(m), G) is constant since both factors are (d + m eta)-parallel.
  double gmax = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t node = 0; node < nodes; ++node) {
    const double c = inner(p.evaluate(static_cast<int>(node), m), pair.G[node]);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
    gmax = std::max(gmax, pair.G[node].norm());
  }
  if ((hi - lo) / (scale * gmax) > tol)
    throw GeometryError("internal inconsistency: (p(m), G) is not constant across the grid (spread " +
                        std::to_string((hi - lo) / (scale * gmax)) + ")");
  if (std::max(std::abs(lo), std::abs(hi)) / (scale * gmax) > tol)
    throw GeometryError("hypothesis fails; transform raises degree instead");

  PolynomialSection out = p;
  out.coeffs_u.clear();
  out.coeffs_v.clear();
  out.singular_value = 0.0;
  out.coeffs.assign(d + 1, Field<LorentzVector>(nodes));
  for (std::size_t node = 0; node < nodes; ++node) {
    const LorentzVector& F = pair.source.jet[node].F;
    const LorentzVector& G = pair.G[node];
    std::vector<LineSplit> parts;
    for (std::size_t k = 0; k <= d; ++k) parts.push_back(split_lines(F, G, p.coeffs[k][node]));

    // L part: p_L(t) = (1 - t/m) phat_L(t), solved upwards; the leftover at t^d vanishes with (p(m), G).
    std::vector<LorentzVector> on_l(d + 1, LorentzVector::Zero(p.dim()));
    if (d >= 1) {
      on_l[0] = parts[0].on_l;
      for (std::size_t k = 1; k < d; ++k) on_l[k] = parts[k].on_l + on_l[k - 1] / m;
    }
    for (std::size_t k = 0; k <= d; ++k) {
      // Lhat part multiplied by (1 - t/m); the t^{d+1} term vanishes because p_d is orthogonal to L.
      LorentzVector v = parts[k].perp + on_l[k] + parts[k].on_lhat;
      if (k >= 1) v -= parts[k - 1].on_lhat / m;
      out.coeffs[k][node] = v;
    }
    // The three parts of p_0 are kept unchanged, so phat(0) = p(0) without recombination error.
    out.coeffs[0][node] = p.coeffs[0][node];
  }
  out.grid = pair.target.grid;
  out.residual = ladder_residual(out, pair.target_eta);
  return out;
}

DarbouxPair complementary_surface(const PolynomialSection& p, const SurfacePatch& patch, const EtaField& eta,
                                  double m) {
  if (m == 0.0) throw GeometryError("complementary surfaces need a non-zero root");
  const auto G = p.evaluate(m);
  double big = 0.0, small = std::numeric_limits<double>::infinity(), scale = 0.0;
  for (const auto& c : p.coeffs)
    for (const auto& x : c) scale = std::max(scale, x.norm());
  for (const auto& g : G) {
    big = std::max(big, g.norm());
    small = std::min(small, g.norm());
  }
  if (small <= 1e-8 * scale) throw DegeneracyError("p(m) vanishes: no complementary surface at this root");
  double nullity = 0.0;
  for (const auto& g : G) nullity = std::max(nullity, std::abs(inner(g, g)) / g.squaredNorm());
  if (nullity > 1e-6) throw GeometryError("m is not a root of the spectral polynomial (p(m) is not null)");
  auto pair = darboux_pair_from_section(patch, eta, m, G);
  record_step(pair, "complementary", {});
  return pair;
}

std::vector<DarbouxPair> complementary_surfaces(const PolynomialSection& p, const SurfacePatch& patch,
                                                const EtaField& eta) {
  std::vector<DarbouxPair> out;
  for (const auto& root : spectral_polynomial(p).roots) out.push_back(complementary_surface(p, patch, eta, root.value));
  return out;
}

Demotion demote_at_repeated_root(const PolynomialSection& p, const SurfacePatch& patch, const EtaField& eta,
                                 double m, double tol) {
  if (p.degree < 1) throw GeometryError("demotion needs degree at least 1");
  const auto spec = spectral_polynomial(p);
  const bool repeated = std::any_of(spec.roots.begin(), spec.roots.end(), [&](const SpectralRoot& r) {
    return r.multiplicity >= 2 && std::abs(r.value - m) <= std::max(spec.cluster_tolerance, 1e-6) * std::abs(m);
  });
  if (!repeated) throw GeometryError("m is not a repeated root of the spectral polynomial");
  Demotion out;
  out.pair = complementary_surface(p, patch, eta, m);
  const auto phat = gauge_conserved(p, out.pair, tol);
  double scale = 0.0;
  for (const auto& c : phat.coeffs)
    for (const auto& x : c) scale = std::max(scale, x.norm());
  double rem = 0.0;
  out.quantity = divide_degree(phat, m, &rem);
  out.division_residual = rem / scale;
  if (out.division_residual > std::sqrt(tol))
    throw GeometryError("division residual too large: the transported quantity does not factor (" +
                        std::to_string(out.division_residual) + ")");
  out.quantity.residual = ladder_residual(out.quantity, out.pair.target_eta);
  out.pair.target.provenance.back().kind = "demote";
  return out;
}

namespace {

// Lift jet of x: v0 + x + (x, x)/2 v_inf in the chart of pair, x in <v0, v_inf>^perp.
LorentzJet chart_lift(const SpaceFormPair& pair, const LorentzVector& x, const LorentzVector& xu,
                      const LorentzVector& xv, const LorentzVector& xuu, const LorentzVector& xuv,
                      const LorentzVector& xvv) {
  LorentzJet j;
  j.F = pair.v0 + x + 0.5 * inner(x, x) * pair.vinf;
  j.Fu = xu + inner(x, xu) * pair.vinf;
  j.Fv = xv + inner(x, xv) * pair.vinf;
  j.Fuu = xuu + (inner(xu, xu) + inner(x, xuu)) * pair.vinf;
  j.Fuv = xuv + (inner(xu, xv) + inner(x, xuv)) * pair.vinf;
  j.Fvv = xvv + (inner(xv, xv) + inner(x, xvv)) * pair.vinf;
  return j;
}

// Hermite rule for the integral of g over a signed step h from the values
// and derivatives at both ends.
LorentzVector hermite(const LorentzVector& g0, const LorentzVector& g1, const LorentzVector& dg0,
                      const LorentzVector& dg1, double h) {
  return 0.5 * h * (g0 + g1) + h * h / 12.0 * (dg0 - dg1);
}

// Swap of v0 and v_inf fixing <v0, v_inf>^perp.
Eigen::MatrixXd chart_swap(const SpaceFormPair& pair) {
  const int dim = static_cast<int>(pair.v0.size());
  const Eigen::MatrixXd gram = lorentz::gram(dim - 2);
  // x + (a - b)(v_inf - v0) with a = -(x, v_inf), b = -(x, v0).
  return Eigen::MatrixXd::Identity(dim, dim) +
         (pair.vinf - pair.v0) * (gram * pair.v0 - gram * pair.vinf).transpose();
}

Eigen::MatrixXd translation(const LorentzVector& x, const LorentzVector& vinf) {
  return lorentz::exp_bivector(Bivector::wedge(x, vinf)).m;
}

}  // namespace

ChristoffelResult christoffel_transform(const SurfacePatch& patch, const EtaField& eta, const SpaceFormPair& pair,
                                        double tol) {
  pair.validate();
  if (pair.v0.size() != patch.w.w.size()) throw GeometryError("space form pair has the wrong dimension");
  if ((patch.w.w - pair.vinf).norm() > 1e-12 * (1.0 + pair.vinf.norm()))
    throw GeometryError("patch must be lifted into E(v_inf) of the pair");
  const auto& g = patch.grid;
  const auto size = static_cast<std::size_t>(g.size());
  const double s = eta.scale;

  // Integrand df^c and its derivatives, exact from the 2-jet.
  Field<LorentzVector> cu(size), cv(size), cuu(size), cuv(size), cvv(size);
  for (std::size_t k = 0; k < size; ++k) {
    const auto& j = patch.jet[k];
    const double e = s * std::exp(-2.0 * patch.theta[k]);
    const LorentzVector fu = pair.project(j.Fu), fv = pair.project(j.Fv);
    const double tu = patch.theta_u[k], tv = patch.theta_v[k];
    cu[k] = e * fu;
    cv[k] = -e * fv;
    cuu[k] = e * (pair.project(j.Fuu) - 2.0 * tu * fu);
    cuv[k] = e * (pair.project(j.Fuv) - 2.0 * tv * fu);
    cvv[k] = -e * (pair.project(j.Fvv) - 2.0 * tv * fv);
  }
  auto edge_integral = [&](int from, int to, int axis, double h) -> LorentzVector {
    const auto a = static_cast<std::size_t>(from), b = static_cast<std::size_t>(to);
    return axis == 0 ? hermite(cu[a], cu[b], cuu[a], cuu[b], h) : hermite(cv[a], cv[b], cvv[a], cvv[b], h);
  };
  auto step_length = [&](const Edge& e) { return e.step * (e.axis == 0 ? g.hu : g.hv); };

  ChristoffelResult out;
  out.pair = pair;
  const IntegrationTree tree = integration_tree(g, 0);
  Field<LorentzVector> fc(size, LorentzVector::Zero(patch.w.w.size()));
  for (const Edge& e : tree.tree)
    fc[static_cast<std::size_t>(e.to)] = fc[static_cast<std::size_t>(e.from)] + edge_integral(e.from, e.to, e.axis, step_length(e));

  // Plaquette loop integrals.
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      if ((i + 1 == g.nu && !g.periodic_u) || (j + 1 == g.nv && !g.periodic_v)) continue;
      const int i1 = (i + 1) % g.nu, j1 = (j + 1) % g.nv;
      const LorentzVector loop = edge_integral(g.index(i, j), g.index(i1, j), 0, g.hu) +
                                 edge_integral(g.index(i1, j), g.index(i1, j1), 1, g.hv) -
                                 edge_integral(g.index(i, j1), g.index(i1, j1), 0, g.hu) -
                                 edge_integral(g.index(i, j), g.index(i, j1), 1, g.hv);
      out.closedness = std::max(out.closedness, loop.norm() / (g.hu * g.hv));
    }
  if (out.closedness > tol)
    throw GeometryError("not isothermic-parametrized: df^c is not closed (" + std::to_string(out.closedness) + ")");

  // Open a periodic direction when f^c picks up a translation period.
  CoordGrid grid = g;
  double fscale = 1.0;
  for (const auto& x : fc) fscale = std::max(fscale, x.norm());
  for (const Edge& e : tree.wrap) {
    const double gap = (fc[static_cast<std::size_t>(e.to)] - fc[static_cast<std::size_t>(e.from)] -
                        edge_integral(e.from, e.to, e.axis, step_length(e)))
                           .norm();
    if (gap > 1e-6 * fscale) (e.axis == 0 ? grid.periodic_u : grid.periodic_v) = false;
  }

  // Stored in the chart with v0 and v_inf exchanged: the lift of f^c into E(v_inf).
  Field<LorentzJet> raw(size);
  for (std::size_t k = 0; k < size; ++k) raw[k] = chart_lift(pair, fc[k], cu[k], cv[k], cuu[k], cuv[k], cvv[k]);
  out.patch = assemble_patch(grid, std::move(raw), SpaceForm(pair.vinf));
  out.patch.provenance = patch.provenance;
  out.patch.provenance.push_back({"christoffel", {}});
  out.eta = build_eta(out.patch, {s, true});
  for (std::size_t k = 0; k < size; ++k)
    out.conformal_factor = std::max(out.conformal_factor,
                                    std::abs(std::exp(out.patch.theta[k]) - s * std::exp(-patch.theta[k])));

  // Gauge identity for g(t) = exp(f^c ^ v_inf) S Gamma(t) exp(-f ^ v_inf).
  const Eigen::MatrixXd S = chart_swap(pair);
  for (double t : residual_sample_parameters())
    for (std::size_t k = 0; k < size; ++k) {
      const LorentzVector f = pair.project(patch.jet[k].F);
      const Eigen::MatrixXd A = translation(fc[k], pair.vinf);
      const Eigen::MatrixXd mid = S * lorentz::gauge_map(pair.v0, pair.vinf, t).m;
      const Eigen::MatrixXd gt = A * mid * translation(-f, pair.vinf);
      const Eigen::MatrixXd gt_inv = OrthogonalMap{gt}.inverse().m;
      const Eigen::MatrixXd core = A * mid;
      const Eigen::MatrixXd core_inv = OrthogonalMap{core}.inverse().m;
      for (int axis = 0; axis < 2; ++axis) {
        const Bivector& e = axis == 0 ? eta.eta_u[k] : eta.eta_v[k];
        const Bivector& ec = axis == 0 ? out.eta.eta_u[k] : out.eta.eta_v[k];
        const LorentzVector& dfc = axis == 0 ? cu[k] : cv[k];
        const LorentzVector df = pair.project(axis == 0 ? patch.jet[k].Fu : patch.jet[k].Fv);
        const Eigen::MatrixXd dg = Bivector::wedge(dfc, pair.vinf).m - core * Bivector::wedge(df, pair.vinf).m * core_inv;
        const Eigen::MatrixXd r = t * gt * e.m * gt_inv - dg - t * ec.m;
        out.gauge_residual = std::max(out.gauge_residual, r.cwiseAbs().maxCoeff());
      }
    }
  return out;
}

PolynomialSection christoffel_conserved(const PolynomialSection& p, const SurfacePatch& patch,
                                        const ChristoffelResult& result, double tol) {
  const auto& pair = result.pair;
  if (p.grid.size() != patch.grid.size() || p.dim() != static_cast<int>(pair.v0.size()))
    throw GeometryError("conserved quantity and patch live on different grids");
  const auto d = static_cast<std::size_t>(p.degree);
  const auto size = static_cast<std::size_t>(p.grid.size());
  double scale = 0.0;
  for (const auto& c : p.coeffs)
    for (const auto& x : c) scale = std::max(scale, x.norm());
  for (const auto& x : p.coeffs[0])
    if (std::abs(inner(x, pair.vinf)) > tol * std::max(scale, 1.0))
      throw GeometryError("hypothesis violated: p(0) is not orthogonal to v_inf");

  const Eigen::MatrixXd S = chart_swap(pair);
  PolynomialSection q = p;
  q.coeffs_u.clear();
  q.coeffs_v.clear();
  q.singular_value = 0.0;
  q.grid = result.patch.grid;
  q.coeffs.assign(d + 1, Field<LorentzVector>(size));
  for (std::size_t k = 0; k < size; ++k) {
    const LorentzVector f = pair.project(patch.jet[k].F);
    const LorentzVector fc = pair.project(result.patch.jet[k].F);
    const Eigen::MatrixXd B = translation(-f, pair.vinf);
    const Eigen::MatrixXd A = translation(fc, pair.vinf);
    std::vector<double> a(d + 1), b(d + 1);
    std::vector<LorentzVector> perp(d + 1);
    for (std::size_t i = 0; i <= d; ++i) {
      const LorentzVector r = B * p.coeffs[i][k];
      a[i] = -inner(r, pair.vinf);  // along v0
      b[i] = -inner(r, pair.v0);    // along v_inf
      perp[i] = r - a[i] * pair.v0 - b[i] * pair.vinf;
    }
    // Gamma(t) scales v_inf by t and v0 by 1/t; a_0 = 0 by hypothesis and b_d = 0 since p_d is orthogonal to F.
    for (std::size_t i = 0; i <= d; ++i) {
      LorentzVector v = perp[i];
      if (i + 1 <= d) v += a[i + 1] * pair.v0;
      if (i >= 1) v += b[i - 1] * pair.vinf;
      q.coeffs[i][k] = A * (S * v);
    }
  }
  q.residual = ladder_residual(q, result.eta);
  return q;
}

TTransform t_transform(const SurfacePatch& patch, const EtaField& eta, double s, int order) {
  TTransform out;
  out.s = s;
  const auto atlas = make_atlas(eta, order);
  out.frame = parallel_frame(atlas, s);
  const auto& g = patch.grid;
  const auto size = static_cast<std::size_t>(g.size());
  const double sigma = eta.scale;
  Field<LorentzJet> raw(size);
  for (std::size_t k = 0; k < size; ++k) {
    // d Phi = s Phi eta and eta F = 0, eta_u F_u = sigma F, eta_v F_v = -sigma F, eta_u F_v = eta_v F_u = 0.
    const Eigen::MatrixXd& phi = out.frame.phi[k].m;
    const auto& j = patch.jet[k];
    raw[k] = {phi * j.F,
              phi * j.Fu,
              phi * j.Fv,
              phi * (j.Fuu + s * sigma * j.F),
              phi * j.Fuv,
              phi * (j.Fvv - s * sigma * j.F)};
  }
  // Phi_s generally has monodromy; open the periodic directions where it does.
  CoordGrid grid = g;
  const IntegrationTree tree = integration_tree(g, 0);
  for (const Edge& e : tree.wrap) {
    const Eigen::MatrixXd gap = out.frame.phi[static_cast<std::size_t>(e.to)].inverse().m -
                                atlas.transport(e, s).m * out.frame.phi[static_cast<std::size_t>(e.from)].inverse().m;
    if (gap.cwiseAbs().maxCoeff() > 1e-6) (e.axis == 0 ? grid.periodic_u : grid.periodic_v) = false;
  }
  out.patch = assemble_patch(grid, std::move(raw), patch.w);
  out.patch.provenance = patch.provenance;
  out.patch.provenance.push_back({"t_transform", {{"s", s}}});
  out.eta = build_eta(out.patch, {sigma, true});

  Field<Eigen::MatrixXd> phi(size);
  for (std::size_t k = 0; k < size; ++k) phi[k] = out.frame.phi[k].m;
  const auto dphi_u = fd::d_u(grid, phi);
  const auto dphi_v = fd::d_v(grid, phi);
  for (std::size_t k = 0; k < size; ++k) {
    const Eigen::MatrixXd inv = out.frame.phi[k].inverse().m;
    for (int axis = 0; axis < 2; ++axis) {
      const Eigen::MatrixXd moved = phi[k] * (axis == 0 ? eta.eta_u[k] : eta.eta_v[k]).m * inv;
      const Eigen::MatrixXd& es = (axis == 0 ? out.eta.eta_u[k] : out.eta.eta_v[k]).m;
      out.eta_mismatch = std::max(out.eta_mismatch, (moved - es).cwiseAbs().maxCoeff());
      const Eigen::MatrixXd connection = (axis == 0 ? dphi_u[k] : dphi_v[k]) * inv;
      for (double t : residual_sample_parameters()) {
        const Eigen::MatrixXd r = (t + s) * moved - connection - t * es;
        out.shift_residual = std::max(out.shift_residual, r.cwiseAbs().maxCoeff());
      }
    }
  }
  return out;
}

PolynomialSection t_transform_conserved(const PolynomialSection& p, const TTransform& tt) {
  const auto d = static_cast<std::size_t>(p.degree);
  const auto size = static_cast<std::size_t>(p.grid.size());
  if (size != tt.frame.phi.size()) throw GeometryError("conserved quantity and transform live on different grids");
  PolynomialSection q = p;
  q.coeffs_u.clear();
  q.coeffs_v.clear();
  q.singular_value = 0.0;
  q.grid = tt.patch.grid;
  // shift[k][j] = binom(k, j) s^{k-j}, the coefficient of t^j in (t + s)^k.
  std::vector<std::vector<double>> shift(d + 1, std::vector<double>(d + 1, 0.0));
  for (std::size_t k = 0; k <= d; ++k)
    for (std::size_t j = 0; j <= k; ++j) {
      double c = 1.0;
      for (std::size_t i = 1; i <= j; ++i) c = c * static_cast<double>(k - j + i) / static_cast<double>(i);
      shift[k][j] = c * std::pow(tt.s, static_cast<double>(k - j));
    }
  for (std::size_t j = 0; j <= d; ++j)
    for (std::size_t node = 0; node < size; ++node) {
      LorentzVector v = LorentzVector::Zero(p.dim());
      for (std::size_t k = j; k <= d; ++k) v += shift[k][j] * p.coeffs[k][node];
      q.coeffs[j][node] = tt.frame.phi[node].m * v;
    }
  q.residual = ladder_residual(q, tt.eta);
  return q;
}

LawsonResult lawson_check(const SurfacePatch& patch, double s, int order) {
  if (!patch.codimension_one()) throw GeometryError("Lawson correspondence needs a codimension-1 patch");
  const auto p = build_type1(patch);
  const auto eta = build_eta(patch, {cmc_eta_scale(patch), false});
  if (p.degree != 1) throw GeometryError("Lawson correspondence needs a type-1 quantity");
  const auto tt = t_transform(patch, eta, s, order);
  const auto q = t_transform_conserved(p, tt);
  LawsonResult out;
  const auto size = static_cast<std::size_t>(patch.grid.size());
  for (std::size_t k = 0; k < size; ++k) {
    out.H -= inner(p.coeffs[1][k], p.coeffs[0][k]);
    out.K -= inner(p.coeffs[0][k], p.coeffs[0][k]);
    out.H_s -= inner(q.coeffs[1][k], q.coeffs[0][k]);
    out.K_s -= inner(q.coeffs[0][k], q.coeffs[0][k]);
  }
  const double n = static_cast<double>(size);
  out.H /= n;
  out.K /= n;
  out.H_s /= n;
  out.K_s /= n;
  out.defect = std::abs(out.H_s * out.H_s + out.K_s - (out.H * out.H + out.K));
  return out;
}

BianchiQuadrilateral bianchi_quadrilateral(const DarbouxPair& pair1, const DarbouxPair& pair2) {
  const double m1 = pair1.m, m2 = pair2.m;
  if (std::abs(m1 - m2) <= 1e-12 * std::max(std::abs(m1), std::abs(m2)))
    throw GeometryError("Bianchi permutability needs distinct parameters");
  if (pair1.truncated || pair2.truncated || pair1.G.size() != pair2.G.size())
    throw GeometryError("Bianchi permutability needs both transforms on the full source grid");
  BianchiQuadrilateral out;
  const auto size = pair1.G.size();
  Field<LorentzVector> ghat(size);
  for (std::size_t k = 0; k < size; ++k) {
    const LorentzVector& F = pair1.source.jet[k].F;
    const LorentzVector& G1 = pair1.G[k];
    const LorentzVector& G2 = pair2.G[k];
    if (coordinate_separation(G1, G2) < 1e-6) throw DegeneracyError("the two transforms intersect");
    ghat[k] = lorentz::gauge_map(F, G1, 1.0 - m2 / m1).apply(G2);
    const LorentzVector b = lorentz::gauge_map(F, G2, 1.0 - m1 / m2).apply(G1);
    const LorentzVector c = lorentz::gauge_map(G2, G1, m2 / m1).apply(F);
    out.agreement = std::max({out.agreement, lorentz::line_angle(ghat[k], b), lorentz::line_angle(ghat[k], c)});
  }
  out.pair = darboux_pair_from_section(pair1.target, pair1.target_eta, m2, ghat);
  out.parallelism = out.pair.consistency;
  record_step(out.pair, "bianchi", {{"m1", m1}});
  return out;
}

PolynomialSection bianchi_conserved(const PolynomialSection& p, const DarbouxPair& pair1,
                                    const BianchiQuadrilateral& quad, double tol) {
  return gauge_conserved(gauge_conserved(p, pair1, tol), quad.pair, tol);
}

}  // namespace isothermic
