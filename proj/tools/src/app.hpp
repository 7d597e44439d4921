#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flowlik::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitIo = 4,
};

/// Parses arguments (without the program name), runs one command and maps
/// exceptions to exit codes. Messages go to `out` and `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowlik::cli
