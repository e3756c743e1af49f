#pragma once

// The four isocalc subcommands. Each returns a report and writes its data
// files into the output directory; errors propagate as exceptions that the
// front end maps to exit codes.

#include "config.hpp"
#include "report.hpp"

namespace isocalc {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitDegenerate = 3;
inline constexpr int kExitIo = 4;

struct CommandResult {
  Report report;
  int exit_code = kExitSuccess;
};

CommandResult cmd_generate(const RunConfig& config);
CommandResult cmd_analyze(const RunConfig& config);
CommandResult cmd_transform(const RunConfig& config);
CommandResult cmd_congruence(const RunConfig& config);

/// Dispatches on config.command, writes report.json into config.out and
/// maps exceptions to exit codes. Never throws.
int run(const RunConfig& config, std::string* message = nullptr);

}  // namespace isocalc
