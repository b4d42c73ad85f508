#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace consprompt::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
};

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "CONSPROMPT_OUT_DIR";

/// Runs the command line `args` (args[0] is the program name) and returns
/// the exit code. Human-readable output goes to `out`, diagnostics to `err`.
///
/// Commands: split, train, eval, sweep-ratio, sweep-kshot, report.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace consprompt::cli
