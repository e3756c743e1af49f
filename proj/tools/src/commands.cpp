#include "commands.hpp"

#include "isothermic/congruence.hpp"
#include "isothermic/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>

namespace isocalc {

namespace {

namespace iso = isothermic;
using nlohmann::json;

// Working state threaded through a transform chain.
struct State {
  iso::SurfacePatch patch;
  iso::EtaField eta;
  std::optional<iso::PolynomialSection> p;
};

json vector_json(const Eigen::VectorXd& x) {
  json out = json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(x[i]);
  return out;
}

json provenance_steps(const std::vector<iso::ProvenanceStep>& steps) {
  json out = json::array();
  for (const auto& s : steps) {
    json params = json::object();
    for (const auto& [key, value] : s.params) params[key] = value;
    out.push_back({{"kind", s.kind}, {"params", params}});
  }
  return out;
}

json diagnostics_json(const iso::SurfacePatch& patch) {
  const auto& d = patch.diag;
  return {{"conformality", d.conformality},
          {"curvature_line", d.curvature_line},
          {"membership", d.membership},
          {"codazzi", d.codazzi},
          {"umbilic_min", d.umbilic_min},
          {"umbilic_max", d.umbilic_max},
          {"umbilic_nodes", d.umbilic_nodes},
          {"totally_umbilic", d.totally_umbilic}};
}

json surface_json(const iso::SurfacePatch& patch) {
  const auto& g = patch.grid;
  return {{"n", patch.n},
          {"grid", {{"nu", g.nu}, {"nv", g.nv}, {"periodic", {g.periodic_u, g.periodic_v}},
                    {"u", {g.u_min, g.u_max()}}, {"v", {g.v_min, g.v_max()}}}},
          {"w", vector_json(patch.w.w)},
          {"diagnostics", diagnostics_json(patch)},
          {"provenance", provenance_steps(patch.provenance)}};
}

json spectral_json(const iso::SpectralPolynomial& s) {
  json roots = json::array();
  for (const auto& r : s.roots) roots.push_back({{"value", r.value}, {"multiplicity", r.multiplicity}});
  return {{"coefficients", s.coeffs},
          {"constancy_residual", s.constancy_residual},
          {"roots", roots},
          {"zero_multiplicity", s.zero_multiplicity},
          {"complex_roots", s.complex_roots}};
}

double spectral_gap(const iso::SpectralPolynomial& a, const iso::SpectralPolynomial& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < std::max(a.coeffs.size(), b.coeffs.size()); ++k) {
    const double x = k < a.coeffs.size() ? a.coeffs[k] : 0.0;
    const double y = k < b.coeffs.size() ? b.coeffs[k] : 0.0;
    worst = std::max(worst, std::abs(x - y));
  }
  return worst;
}

std::filesystem::path prepare_out(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec) throw iso::IoError("cannot create output directory " + cfg.out.string());
  return cfg.out;
}

iso::SurfacePatch load_surface(const RunConfig& cfg) {
  const SurfaceSpec& s = cfg.surface;
  if (s.file) return iso::read_surface(std::filesystem::path(*s.file));
  iso::SpaceForm w = iso::SpaceForm::flat(3);
  if (s.w) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(s.w->size()));
    for (std::size_t i = 0; i < s.w->size(); ++i) v[static_cast<Eigen::Index>(i)] = (*s.w)[i];
    try {
      w = iso::SpaceForm(v);
    } catch (const iso::GeometryError& e) {
      throw ValidationError(std::string("invalid space form: ") + e.what());
    }
  }
  try {
    const auto grid = iso::CoordGrid::make(s.nu, s.nv, s.u0, s.u1, s.v0, s.v1, s.periodic_u, s.periodic_v);
    return iso::generate_surface(s.kind, s.params, grid, w);
  } catch (const iso::GeometryError& e) {
    throw ValidationError(std::string("invalid surface parameters: ") + e.what());
  }
}

double mean_curvature_spread(const iso::SurfacePatch& patch) {
  if (!patch.codimension_one() || patch.H.empty()) return INFINITY;
  double mean = 0.0;
  for (double h : patch.H) mean += h;
  mean /= static_cast<double>(patch.H.size());
  double spread = 0.0;
  for (double h : patch.H) spread = std::max(spread, std::abs(h - mean));
  return spread;
}

iso::EtaField make_eta(const iso::SurfacePatch& patch, const RunConfig& cfg) {
  double scale = 1.0;
  const bool cmc = mean_curvature_spread(patch) <= 1e-6;
  if (cfg.solver.eta_scale == "cmc") {
    if (!patch.codimension_one()) throw ValidationError("eta_scale cmc needs a codimension-1 patch");
    scale = iso::cmc_eta_scale(patch);
  } else if (cfg.solver.eta_scale == "auto" && cmc) {
    const double s = iso::cmc_eta_scale(patch);
    if (std::abs(s) > 1e-12) scale = s;
  }
  return iso::build_eta(patch, {scale, patch.diag.totally_umbilic});
}

State initial_state(const RunConfig& cfg) {
  State st;
  st.patch = load_surface(cfg);
  st.eta = make_eta(st.patch, cfg);
  const bool want = cfg.quantity == "type1" || (cfg.quantity == "auto" && mean_curvature_spread(st.patch) <= 1e-6 &&
                                                 !st.patch.diag.totally_umbilic);
  if (want) {
    try {
      st.p = iso::build_type1(st.patch, st.eta.scale);
    } catch (const iso::GeometryError&) {
      if (cfg.quantity == "type1") throw;
    }
  }
  return st;
}

json quantity_json(const iso::PolynomialSection& p, const iso::EtaField& eta) {
  return {{"degree", p.degree},
          {"ladder_residual", p.residual},
          {"constraint_residual", iso::constraint_residual(p, eta)},
          {"spectral", spectral_json(iso::spectral_polynomial(p))}};
}

json analyze_state(State& st, int max_d, const RunConfig& cfg) {
  json out;
  out["eta"] = {{"scale", st.eta.scale}, {"closedness", st.eta.closedness}, {"annihilation", st.eta.annihilation}};
  iso::SolverOptions opt;
  opt.tol = cfg.solver.tol;
  opt.order = cfg.solver.order;
  json levels = json::array();
  std::optional<int> type;
  for (int d = 0; d <= max_d; ++d) {
    json level = {{"d", d}};
    const auto sv = iso::conserved_singular_values(st.eta, d, opt);
    json smallest = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(3, sv.size()); ++i) smallest.push_back(sv[i]);
    level["smallest_singular_values"] = smallest;
    std::vector<iso::PolynomialSection> sols;
    try {
      sols = iso::solve_conserved(st.eta, d, opt);
    } catch (const iso::GeometryError& e) {
      level["error"] = e.what();
    }
    level["solutions"] = sols.size();
    level["special"] = !sols.empty();
    if (!sols.empty()) {
      const auto& p = sols.front();
      level["quantity"] = quantity_json(p, st.eta);
      const auto structure = iso::verify_structure(p, st.patch);
      level["structure"] = {{"constant_term", structure.constant_term},
                            {"orthogonality", structure.orthogonality},
                            {"parallelism", structure.parallelism}};
      if (d == 2 && st.patch.codimension_one()) {
        try {
          const auto c = iso::class_from_quantity(p, st.patch, st.eta.scale);
          level["class_constants"] = {{"A", c.A}, {"B", c.B}, {"C", c.C}, {"D", c.D},
                                      {"bianchi_residual", iso::check_darboux_bianchi(st.patch, c)}};
        } catch (const iso::GeometryError& e) {
          level["class_constants_error"] = e.what();
        }
      }
      if (!type) {
        type = d;
        st.p = p;
      }
    }
    levels.push_back(level);
  }
  out["levels"] = levels;
  if (type) {
    out["verdict"] = "type " + std::to_string(*type);
  } else {
    out["verdict"] = "not special <= " + std::to_string(max_d);
    const auto sv = iso::conserved_singular_values(st.eta, max_d, opt);
    out["smallest_singular_value"] = sv.empty() ? 0.0 : sv.front();
  }
  return out;
}

// Least-squares similarity a f0 + b matching f1, with the residual relative
// to the diameter of f1.
json similarity_match(const iso::SurfacePatch& original, const iso::SurfacePatch& result) {
  if (original.f.size() != result.f.size()) return {{"error", "grids differ"}};
  const std::size_t n = original.f.size();
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(original.f[0].size()), m1 = m0;
  for (std::size_t k = 0; k < n; ++k) {
    m0 += original.f[k];
    m1 += result.f[k];
  }
  m0 /= static_cast<double>(n);
  m1 /= static_cast<double>(n);
  double num = 0.0, den = 0.0, diam = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    num += (original.f[k] - m0).dot(result.f[k] - m1);
    den += (original.f[k] - m0).squaredNorm();
    diam = std::max(diam, (result.f[k] - m1).norm());
  }
  const double a = num / den;
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, (result.f[k] - m1 - a * (original.f[k] - m0)).norm());
  return {{"scale", a}, {"translation", vector_json(m1 - a * m0)}, {"residual", worst / std::max(diam, 1e-300)}};
}

json step_darboux(State& st, const TransformStep& step, const RunConfig& cfg) {
  const double angle = step.seed_angle.value_or(cfg.seed_angle);
  const double radius = step.seed_radius.value_or(cfg.seed_radius);
  if (step.seed_node < 0 || step.seed_node >= st.patch.grid.size())
    throw ValidationError("darboux seed_node outside the grid");
  const auto seed = iso::darboux_seed(st.patch, step.seed_node, angle, radius);
  iso::DarbouxOptions opt;
  opt.base_node = step.seed_node;
  const auto pair = iso::darboux_transform(st.patch, st.eta, step.m, seed, opt);
  json out = {{"kind", "darboux"},
              {"m", step.m},
              {"seed_angle", angle},
              {"seed_radius", radius},
              {"nullity", pair.nullity},
              {"separation", pair.separation},
              {"gauge_residual", pair.gauge_residual},
              {"consistency", pair.consistency},
              {"truncated", pair.truncated},
              {"offset", {pair.offset_i, pair.offset_j}}};
  if (st.p) {
    const auto promoted = iso::promote_degree(iso::restrict_to_pair(*st.p, pair), step.m);
    const auto q = iso::gauge_conserved(promoted, pair);
    out["quantity"] = quantity_json(q, pair.target_eta);
    out["spectral_transport"] =
        spectral_gap(iso::spectral_polynomial(promoted), iso::spectral_polynomial(q));
    st.p = q;
  }
  st.patch = pair.target;
  st.eta = pair.target_eta;
  return out;
}

json step_christoffel(State& st, const iso::SurfacePatch* before_previous) {
  const auto ch = iso::christoffel_transform(st.patch, st.eta);
  json out = {{"kind", "christoffel"},
              {"closedness", ch.closedness},
              {"gauge_residual", ch.gauge_residual},
              {"conformal_factor", ch.conformal_factor}};
  if (st.p) {
    try {
      const auto q = iso::christoffel_conserved(*st.p, st.patch, ch);
      out["quantity"] = quantity_json(q, ch.eta);
      out["spectral_transport"] = spectral_gap(iso::spectral_polynomial(*st.p), iso::spectral_polynomial(q));
      st.p = q;
    } catch (const iso::GeometryError& e) {
      out["quantity_dropped"] = e.what();
      st.p.reset();
    }
  }
  if (before_previous) out["match_to_surface_before_previous_christoffel"] = similarity_match(*before_previous, ch.patch);
  st.patch = ch.patch;
  st.eta = ch.eta;
  return out;
}

json step_t_transform(State& st, const TransformStep& step, const RunConfig& cfg) {
  const auto tt = iso::t_transform(st.patch, st.eta, step.s, cfg.solver.order);
  json out = {{"kind", "t_transform"},
              {"s", step.s},
              {"eta_mismatch", tt.eta_mismatch},
              {"shift_residual", tt.shift_residual}};
  if (st.p) {
    const auto q = iso::t_transform_conserved(*st.p, tt);
    // Expected spectral polynomial c(t + s) by binomial expansion.
    const auto before = iso::spectral_polynomial(*st.p);
    iso::SpectralPolynomial shifted;
    shifted.coeffs.assign(before.coeffs.size(), 0.0);
    for (std::size_t k = 0; k < before.coeffs.size(); ++k) {
      double binom = 1.0;
      for (std::size_t j = 0; j <= k; ++j) {
        shifted.coeffs[j] += before.coeffs[k] * binom * std::pow(step.s, static_cast<double>(k - j));
        binom = binom * static_cast<double>(k - j) / static_cast<double>(j + 1);
      }
    }
    out["quantity"] = quantity_json(q, tt.eta);
    out["spectral_shift"] = spectral_gap(shifted, iso::spectral_polynomial(q));
    if (st.p->degree == 1 && st.patch.codimension_one()) {
      try {
        const auto l = iso::lawson_check(st.patch, step.s, cfg.solver.order);
        out["lawson"] = {{"H", l.H}, {"K", l.K}, {"H_s", l.H_s}, {"K_s", l.K_s}, {"defect", l.defect}};
      } catch (const iso::GeometryError& e) {
        out["lawson_error"] = e.what();
      }
    }
    st.p = q;
  }
  st.patch = tt.patch;
  st.eta = tt.eta;
  return out;
}

json step_complementary(State& st, const TransformStep& step) {
  if (!st.p) throw ValidationError("complementary needs a conserved quantity; add an analyze step first");
  const auto pair = iso::complementary_surface(*st.p, st.patch, st.eta, step.m);
  const auto q = iso::gauge_conserved(iso::restrict_to_pair(*st.p, pair), pair);
  json out = {{"kind", "complementary"},
              {"m", step.m},
              {"nullity", pair.nullity},
              {"separation", pair.separation},
              {"gauge_residual", pair.gauge_residual},
              {"truncated", pair.truncated},
              {"quantity", quantity_json(q, pair.target_eta)},
              {"spectral_transport", spectral_gap(iso::spectral_polynomial(*st.p), iso::spectral_polynomial(q))}};
  st.p = q;
  st.patch = pair.target;
  st.eta = pair.target_eta;
  return out;
}

void write_scalar_exports(const std::filesystem::path& dir, const iso::SurfacePatch& patch) {
  iso::write_scalar_csv(dir / "theta.csv", patch.grid, patch.theta, "theta");
  if (patch.codimension_one()) {
    iso::write_scalar_csv(dir / "H.csv", patch.grid, patch.H, "H");
    iso::write_scalar_csv(dir / "k1.csv", patch.grid, patch.k1, "k1");
    iso::write_scalar_csv(dir / "k2.csv", patch.grid, patch.k2, "k2");
  }
}

json run_chain(State& st, const RunConfig& cfg, json& steps) {
  std::optional<iso::SurfacePatch> before_christoffel;
  bool previous_christoffel = false;
  json last_analysis;
  for (const auto& step : cfg.chain) {
    if (step.kind == "darboux") {
      steps.push_back(step_darboux(st, step, cfg));
    } else if (step.kind == "christoffel") {
      const auto input = st.patch;
      steps.push_back(step_christoffel(st, previous_christoffel ? &*before_christoffel : nullptr));
      before_christoffel = input;
    } else if (step.kind == "t_transform") {
      steps.push_back(step_t_transform(st, step, cfg));
    } else if (step.kind == "complementary") {
      steps.push_back(step_complementary(st, step));
    } else if (step.kind == "analyze") {
      json a = analyze_state(st, step.d, cfg);
      a["kind"] = "analyze";
      last_analysis = a;
      steps.push_back(a);
    }
    previous_christoffel = step.kind == "christoffel";
  }
  return last_analysis;
}

json base_report(const RunConfig& cfg, const std::string& command) {
  return {{"command", command}, {"threads", cfg.threads}, {"tolerance", cfg.solver.tol}};
}

}  // namespace

CommandResult cmd_generate(const RunConfig& cfg) {
  if (cfg.surface.file) throw ValidationError("generate needs a surface kind, not a file");
  const auto dir = prepare_out(cfg);
  const auto patch = load_surface(cfg);
  CommandResult r;
  r.report = base_report(cfg, "generate");
  r.report["surface"] = surface_json(patch);
  iso::write_surface(dir / "surface.txt", patch);
  write_scalar_exports(dir, patch);
  r.report["files"] = {"surface.txt", "theta.csv"};
  if (patch.diag.totally_umbilic) {
    r.report["warning"] = "totally umbilic patch: eta is not determined by the surface";
    r.exit_code = kExitDegenerate;
  }
  return r;
}

CommandResult cmd_analyze(const RunConfig& cfg) {
  prepare_out(cfg);
  State st = initial_state(cfg);
  st.p.reset();
  CommandResult r;
  r.report = base_report(cfg, "analyze");
  r.report["surface"] = surface_json(st.patch);
  r.report["analysis"] = analyze_state(st, cfg.solver.d, cfg);
  if (st.patch.diag.totally_umbilic) r.report["warning"] = "totally umbilic patch: eta depends on the coordinates";
  return r;
}

CommandResult cmd_transform(const RunConfig& cfg) {
  if (cfg.chain.empty()) throw ValidationError("transform needs a non-empty chain");
  const auto dir = prepare_out(cfg);
  State st = initial_state(cfg);
  CommandResult r;
  r.report = base_report(cfg, "transform");
  r.report["input"] = surface_json(st.patch);
  if (st.p) r.report["input_quantity"] = quantity_json(*st.p, st.eta);
  json steps = json::array();
  const json analysis = run_chain(st, cfg, steps);
  r.report["steps"] = steps;
  if (!analysis.is_null()) r.report["verdict"] = analysis["verdict"];
  r.report["output"] = surface_json(st.patch);
  iso::write_surface(dir / "surface.txt", st.patch);
  if (st.p) iso::write_section(dir / "quantity.txt", *st.p);
  return r;
}

CommandResult cmd_congruence(const RunConfig& cfg) {
  const auto dir = prepare_out(cfg);
  State st = initial_state(cfg);
  CommandResult r;
  r.report = base_report(cfg, "congruence");
  json steps = json::array();
  run_chain(st, cfg, steps);
  if (!steps.empty()) r.report["steps"] = steps;
  if (!st.p) analyze_state(st, std::min(cfg.solver.d, 2), cfg);
  if (!st.p || st.p->degree < 1 || st.p->degree > 2)
    throw iso::GeometryError("congruence needs a conserved quantity of degree 1 or 2 on the surface");
  const iso::PolynomialSection& p = *st.p;
  r.report["surface"] = surface_json(st.patch);
  r.report["quantity"] = quantity_json(p, st.eta);

  const auto pairs = iso::complementary_surfaces(p, st.patch, st.eta);
  json comps = json::array();
  for (const auto& pair : pairs) {
    const auto sys = iso::spherical_system(pair);
    comps.push_back({{"m", pair.m},
                     {"truncated", pair.truncated},
                     {"flatness", sys.flatness},
                     {"orthogonality", sys.orthogonality}});
  }
  r.report["complementary"] = comps;
  if (pairs.size() < 2)
    throw iso::GeometryError("fewer than two complementary surfaces; coincidence needs two distinct real roots");

  const iso::LorentzVector& w = st.patch.w.w;
  const auto control = iso::darboux_transform(
      st.patch, st.eta, cfg.congruence.control_m,
      iso::darboux_seed(st.patch, 0, cfg.congruence.control_seed_angle, cfg.seed_radius));

  if (p.degree == 2) {
    const auto c = iso::sphere_plane_coincidence(pairs[0], pairs[1], w, cfg.congruence.threshold);
    json co = {{"gap", c.gap},
               {"threshold", cfg.congruence.threshold},
               {"verdict", c.gap <= cfg.congruence.threshold ? "sphere-planes coincide" : "sphere-planes differ"},
               {"principal_violations", c.principal_violations}};
    if (c.quantity) {
      co["converse"] = {{"beta", c.beta},
                        {"beta_spread", c.beta_spread},
                        {"q", c.q},
                        {"q_spread", c.q_spread},
                        {"decomposition", c.decomposition},
                        {"constraint_residual", c.constraint},
                        {"spectral", spectral_json(iso::spectral_polynomial(*c.quantity))}};
    }
    r.report["sphere_planes"] = co;
    const auto neg = iso::sphere_plane_coincidence(pairs.back(), control, w, cfg.congruence.threshold);
    r.report["negative_control"] = {{"m", cfg.congruence.control_m}, {"gap", neg.gap}};

    json quadrics = json::array();
    if (std::abs(iso::lorentz::inner(w, w)) > 1e-10 * w.squaredNorm()) {
      r.report["quadric_skipped"] = "the space form is not flat";
    } else {
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto q = iso::envelope_quadric(p, st.patch, st.eta, pairs[i].m, w);
        const std::string curve = "quadric_curve_" + std::to_string(i) + ".csv";
        const std::string coeffs = "quadric_coefficients_" + std::to_string(i) + ".csv";
        iso::write_quadric_curve_csv(dir / curve, q);
        iso::write_quadric_coefficients_csv(dir / coeffs, q);
        quadrics.push_back({{"m", q.m},
                            {"B", q.B},
                            {"coefficients",
                             {{"alpha^2", q.c_aa}, {"alpha*beta", q.c_ab}, {"alpha*gamma", q.c_ac},
                              {"beta*gamma", q.c_bc}, {"alpha", q.c_a}}},
                            {"coefficient_drift", q.coefficient_drift},
                            {"relation_residual", q.relation_residual},
                            {"metric_residual", q.metric_residual},
                            {"frame_consistency", q.frame_consistency},
                            {"envelope_residual", q.envelope_residual},
                            {"excluded_nodes", q.excluded.size()},
                            {"files", {curve, coeffs}}});
      }
      r.report["quadrics"] = quadrics;
    }
  } else {
    const auto c = iso::spherical_coincidence_type1(pairs[0], pairs[1], cfg.congruence.threshold);
    json co = {{"gap", c.gap},
               {"threshold", cfg.congruence.threshold},
               {"verdict", c.gap <= cfg.congruence.threshold ? "spherical systems coincide" : "spherical systems differ"}};
    if (c.quantity)
      co["converse"] = {{"beta", c.beta},
                        {"beta_spread", c.beta_spread},
                        {"constraint_residual", c.constraint},
                        {"spectral", spectral_json(iso::spectral_polynomial(*c.quantity))}};
    r.report["spherical_systems"] = co;
    const auto neg = iso::spherical_coincidence_type1(pairs.back(), control, cfg.congruence.threshold);
    r.report["negative_control"] = {{"m", cfg.congruence.control_m}, {"gap", neg.gap}};
  }
  return r;
}

int run(const RunConfig& cfg, std::string* message) {
  iso::set_thread_count(cfg.threads);
  CommandResult r;
  std::string error;
  try {
    if (cfg.command == "generate")
      r = cmd_generate(cfg);
    else if (cfg.command == "analyze")
      r = cmd_analyze(cfg);
    else if (cfg.command == "transform")
      r = cmd_transform(cfg);
    else if (cfg.command == "congruence")
      r = cmd_congruence(cfg);
    else
      throw ValidationError("unknown command '" + cfg.command + "'");
  } catch (const ValidationError& e) {
    r.exit_code = kExitValidation;
    error = e.what();
  } catch (const iso::IoError& e) {
    r.exit_code = kExitIo;
    error = e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    r.exit_code = kExitIo;
    error = e.what();
  } catch (const iso::GeometryError& e) {
    r.exit_code = kExitDegenerate;
    error = e.what();
  } catch (const std::exception& e) {
    r.exit_code = 1;
    error = e.what();
  }
  if (!error.empty()) {
    r.report = base_report(cfg, cfg.command);
    r.report["error"] = error;
  }
  r.report["exit_code"] = r.exit_code;
  if (message) *message = error;
  if (r.exit_code != kExitIo) {
    try {
      std::error_code ec;
      std::filesystem::create_directories(cfg.out, ec);
      write_report(cfg.out / "report.json", r.report);
    } catch (const std::exception& e) {
      if (message) *message = e.what();
      return kExitIo;
    }
  }
  return r.exit_code;
}

}  // namespace isocalc
