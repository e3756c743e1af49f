#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
  CLI::App app{"isocalc: isothermic surfaces, conserved quantities, transforms and sphere congruences"};
  app.require_subcommand(1);
  std::optional<std::string> config_path, out;
  std::optional<int> threads;
  std::optional<double> tol, seed_angle;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out, "output directory (overrides 'out')");
  app.add_option("--threads", threads, "worker threads (overrides 'threads')")->check(CLI::PositiveNumber);
  app.add_option("--tol", tol, "solver tolerance (overrides 'tol')")->check(CLI::PositiveNumber);
  app.add_option("--seed-angle", seed_angle, "default Darboux seed angle (overrides 'seed_angle')");
  for (const char* name : {"generate", "analyze", "transform", "congruence"})
    app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : isocalc::kExitValidation;
  }

  isocalc::RunConfig config;
  try {
    if (config_path) config = isocalc::load_config(*config_path);
  } catch (const isocalc::ValidationError& e) {
    std::cerr << "isocalc: " << e.what() << "\n";
    return isocalc::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "isocalc: " << e.what() << "\n";
    return isocalc::kExitIo;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (!config.command.empty() && config.command != command) {
    std::cerr << "isocalc: configuration is for '" << config.command << "', not '" << command << "'\n";
    return isocalc::kExitValidation;
  }
  config.command = command;
  if (out) config.out = *out;
  if (threads) config.threads = *threads;
  if (tol) config.solver.tol = *tol;
  if (seed_angle) config.seed_angle = *seed_angle;

  std::string message;
  const int code = isocalc::run(config, &message);
  if (!message.empty()) std::cerr << "isocalc: " << message << "\n";
  std::cout << command << ": exit " << code << ", report " << (config.out / "report.json").string() << "\n";
  return code;
}
