#include "config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace isocalc {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("key '" + key + "' in " + where + " has the wrong type");
  }
}

template <class T>
void read(const json& obj, const std::string& key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

SurfaceSpec parse_surface(const json& s) {
  const std::string where = "surface";
  reject_unknown(s, where, {"kind", "file", "params", "grid", "w"});
  SurfaceSpec spec;
  require(s.contains("kind") != s.contains("file"), "surface needs exactly one of 'kind' or 'file'");
  if (s.contains("file")) {
    spec.file = get<std::string>(s, "file", where);
    require(!s.contains("params") && !s.contains("grid"), "a surface file takes no 'params' or 'grid'");
  } else {
    try {
      spec.kind = isothermic::parse_surface_kind(get<std::string>(s, "kind", where));
    } catch (const isothermic::GeometryError& e) {
      throw ValidationError(e.what());
    }
  }
  if (s.contains("params")) {
    const json& p = s.at("params");
    const std::string pw = "surface.params";
    reject_unknown(p, pw, {"radius", "major_radius", "slope", "offset", "amplitude", "profile", "coefficients"});
    read(p, "radius", pw, spec.params.radius);
    read(p, "major_radius", pw, spec.params.major_radius);
    read(p, "slope", pw, spec.params.slope);
    read(p, "offset", pw, spec.params.offset);
    read(p, "amplitude", pw, spec.params.amplitude);
    read(p, "coefficients", pw, spec.params.coefficients);
    if (p.contains("profile")) {
      try {
        spec.params.profile = isothermic::parse_profile(get<std::string>(p, "profile", pw));
      } catch (const isothermic::GeometryError& e) {
        throw ValidationError(e.what());
      }
    }
  }
  apply_default_domain(spec);
  if (s.contains("grid")) {
    const json& g = s.at("grid");
    const std::string gw = "surface.grid";
    reject_unknown(g, gw, {"nu", "nv", "u", "v", "periodic"});
    read(g, "nu", gw, spec.nu);
    read(g, "nv", gw, spec.nv);
    if (g.contains("u")) {
      const auto u = get<std::vector<double>>(g, "u", gw);
      require(u.size() == 2, "surface.grid.u must be [u0, u1]");
      spec.u0 = u[0];
      spec.u1 = u[1];
    }
    if (g.contains("v")) {
      const auto v = get<std::vector<double>>(g, "v", gw);
      require(v.size() == 2, "surface.grid.v must be [v0, v1]");
      spec.v0 = v[0];
      spec.v1 = v[1];
    }
    if (g.contains("periodic")) {
      const auto p = get<std::vector<bool>>(g, "periodic", gw);
      require(p.size() == 2, "surface.grid.periodic must be [bool, bool]");
      spec.periodic_u = p[0];
      spec.periodic_v = p[1];
    }
  }
  require(spec.nu >= 8 && spec.nv >= 8, "surface.grid needs at least 8 nodes per direction");
  require(spec.u1 > spec.u0 && spec.v1 > spec.v0, "surface.grid ranges must be increasing");
  if (s.contains("w")) spec.w = get<std::vector<double>>(s, "w", where);
  return spec;
}

TransformStep parse_step(const json& s, std::size_t index) {
  const std::string where = "chain[" + std::to_string(index) + "]";
  require(s.is_object() && s.contains("kind"), where + " needs a 'kind'");
  TransformStep step;
  step.kind = get<std::string>(s, "kind", where);
  if (step.kind == "darboux") {
    reject_unknown(s, where, {"kind", "m", "seed_angle", "seed_radius", "seed_node"});
    require(s.contains("m"), where + ": darboux needs 'm'");
    step.m = get<double>(s, "m", where);
    require(step.m != 0.0, where + ": darboux needs m != 0");
    if (s.contains("seed_angle")) step.seed_angle = get<double>(s, "seed_angle", where);
    if (s.contains("seed_radius")) step.seed_radius = get<double>(s, "seed_radius", where);
    read(s, "seed_node", where, step.seed_node);
  } else if (step.kind == "christoffel") {
    reject_unknown(s, where, {"kind"});
  } else if (step.kind == "t_transform") {
    reject_unknown(s, where, {"kind", "s"});
    require(s.contains("s"), where + ": t_transform needs 's'");
    step.s = get<double>(s, "s", where);
  } else if (step.kind == "complementary") {
    reject_unknown(s, where, {"kind", "m"});
    require(s.contains("m"), where + ": complementary needs 'm'");
    step.m = get<double>(s, "m", where);
    require(step.m != 0.0, where + ": complementary needs m != 0");
  } else if (step.kind == "analyze") {
    reject_unknown(s, where, {"kind", "d"});
    read(s, "d", where, step.d);
    require(step.d >= 0 && step.d <= 4, where + ": analyze needs 0 <= d <= 4");
  } else {
    throw ValidationError(where + ": unknown transform kind '" + step.kind + "'");
  }
  return step;
}

}  // namespace

void apply_default_domain(SurfaceSpec& spec) {
  const double two_pi = 2.0 * std::numbers::pi;
  spec.u0 = 0.0;
  spec.u1 = two_pi;
  spec.periodic_u = true;
  if (spec.kind == isothermic::SurfaceKind::clifford_torus || spec.kind == isothermic::SurfaceKind::clifford_torus_s3) {
    spec.v0 = 0.0;
    spec.v1 = two_pi;
    spec.periodic_v = true;
  } else {
    spec.v0 = -1.0;
    spec.v1 = 1.0;
    spec.periodic_v = false;
  }
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("configuration is not valid JSON: ") + e.what());
  }
  const std::string where = "configuration";
  reject_unknown(doc, where,
                 {"command", "surface", "chain", "solver", "congruence", "quantity", "out", "threads", "tol",
                  "seed_angle", "seed_radius"});
  RunConfig cfg;
  read(doc, "command", where, cfg.command);
  if (doc.contains("surface")) cfg.surface = parse_surface(doc.at("surface"));
  if (doc.contains("chain")) {
    const json& chain = doc.at("chain");
    require(chain.is_array(), "chain must be an array");
    for (std::size_t i = 0; i < chain.size(); ++i) cfg.chain.push_back(parse_step(chain[i], i));
  }
  if (doc.contains("solver")) {
    const json& s = doc.at("solver");
    reject_unknown(s, "solver", {"d", "tol", "order", "eta_scale"});
    read(s, "d", "solver", cfg.solver.d);
    read(s, "tol", "solver", cfg.solver.tol);
    read(s, "order", "solver", cfg.solver.order);
    read(s, "eta_scale", "solver", cfg.solver.eta_scale);
  }
  read(doc, "tol", where, cfg.solver.tol);
  if (doc.contains("congruence")) {
    const json& c = doc.at("congruence");
    reject_unknown(c, "congruence", {"control_m", "control_seed_angle", "threshold"});
    read(c, "control_m", "congruence", cfg.congruence.control_m);
    read(c, "control_seed_angle", "congruence", cfg.congruence.control_seed_angle);
    read(c, "threshold", "congruence", cfg.congruence.threshold);
  }
  read(doc, "quantity", where, cfg.quantity);
  if (doc.contains("out")) cfg.out = get<std::string>(doc, "out", where);
  read(doc, "threads", where, cfg.threads);
  read(doc, "seed_angle", where, cfg.seed_angle);
  read(doc, "seed_radius", where, cfg.seed_radius);

  require(cfg.solver.d >= 0 && cfg.solver.d <= 4, "solver.d must lie in 0..4");
  require(cfg.solver.tol > 0.0, "solver.tol must be positive");
  require(cfg.solver.order == 2 || cfg.solver.order == 4, "solver.order must be 2 or 4");
  require(cfg.solver.eta_scale == "auto" || cfg.solver.eta_scale == "cmc" || cfg.solver.eta_scale == "unit",
          "solver.eta_scale must be auto, cmc or unit");
  require(cfg.quantity == "auto" || cfg.quantity == "type1" || cfg.quantity == "none",
          "quantity must be auto, type1 or none");
  require(cfg.threads >= 1, "threads must be at least 1");
  require(cfg.seed_radius > 0.0, "seed_radius must be positive");
  require(cfg.congruence.threshold > 0.0, "congruence.threshold must be positive");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::filesystem::filesystem_error("cannot read configuration", path, std::make_error_code(std::errc::no_such_file_or_directory));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace isocalc
