#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lfbm {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

/// Entry point of the `lfbm` command-line tool. `args` excludes the program
/// name. Human-readable progress and errors go to `err`; JSON printed to the
/// console (when no --out is given) goes to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lfbm
