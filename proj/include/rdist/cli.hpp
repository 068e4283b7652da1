#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rdist {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

/// Parses argv (without the program name) and runs one subcommand. Normal
/// output goes to `out`, diagnostics and usage text to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rdist
