#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ofotune {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitSimulation = 2,
};

/// Runs the `ofotune` command line. Messages go to `out` / `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace ofotune
