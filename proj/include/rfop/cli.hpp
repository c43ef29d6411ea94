#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rfop {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

/// Entry point of the `rfop` tool. `args` excludes the program name.
/// Machine-readable results go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rfop
