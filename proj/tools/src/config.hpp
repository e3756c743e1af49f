#pragma once

// Run configuration of isocalc: a JSON document whose keys are validated
// strictly (unknown keys are errors) before anything runs.

#include "isothermic/surface.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace isocalc {

/// Invalid configuration or command line (exit code 2).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SurfaceSpec {
  // Either a generator kind with parameters and grid, or a surface file.
  std::optional<std::string> file;
  isothermic::SurfaceKind kind = isothermic::SurfaceKind::cylinder;
  isothermic::GeneratorParams params;
  int nu = 64, nv = 64;
  double u0 = 0.0, u1 = 0.0, v0 = 0.0, v1 = 0.0;
  bool periodic_u = true, periodic_v = false;
  bool has_domain = false;
  std::optional<std::vector<double>> w;  // space-form vector, flat when absent
};

struct TransformStep {
  std::string kind;  // darboux | christoffel | t_transform | complementary | analyze
  double m = 0.0;
  double s = 0.0;
  int d = 2;
  std::optional<double> seed_angle;
  std::optional<double> seed_radius;
  int seed_node = 0;
};

struct SolverSettings {
  int d = 2;
  double tol = 1e-5;
  int order = 4;
  std::string eta_scale = "auto";  // auto | cmc | unit
};

struct CongruenceSettings {
  double control_m = 1.3;
  double control_seed_angle = 2.0;
  double threshold = 1e-4;
};

struct RunConfig {
  std::string command;
  SurfaceSpec surface;
  std::vector<TransformStep> chain;
  SolverSettings solver;
  CongruenceSettings congruence;
  std::string quantity = "auto";  // auto | type1 | none
  std::filesystem::path out = "isocalc-out";
  int threads = 1;
  double seed_angle = 3.141592653589793;
  double seed_radius = 2.0;
};

/// Parses and validates a configuration document. Throws ValidationError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Default surface grid domain for a kind when none is given.
void apply_default_domain(SurfaceSpec& spec);

}  // namespace isocalc
