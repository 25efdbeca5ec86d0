#pragma once

#include <iosfwd>

namespace l0flow {

enum ExitCode : int {
  kExitOk = 0,
  kExitSolver = 1,
  kExitConfig = 2,
  kExitViolation = 3,
};

/// Parses argv (argv[0] is the program name), runs the experiment and
/// returns the exit code. The one-line summary goes to `out`, diagnostics to
/// `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace l0flow
