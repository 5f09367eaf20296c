#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace usdiff {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitValidation = 2,  // usage or invalid parameters
  kExitFormat = 3,      // unreadable, unwritable or malformed files
  kExitNumeric = 4,     // NaN / infinity detected
};

/// Runs `usdiff <subcommand> ...`; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace usdiff
