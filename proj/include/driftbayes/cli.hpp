#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace driftbayes::cli {

/// Exit codes of run_command.
enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2 };

/// Runs one subcommand (`args[0]` is the subcommand, not the program name):
/// validate, simulate, ingest, net, posterior, consistency, divergence,
/// identifiability. Artifacts and a manifest.json go to the output
/// directory.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// argv form for main().
int run_command(int argc, char** argv);

}  // namespace driftbayes::cli
