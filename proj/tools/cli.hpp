#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rootspoof::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kInputError = 3,
  kInvariantViolation = 4,
  kIoError = 5,
};

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rootspoof::cli
