#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pairflow::cli {

enum ExitCode : int {
  kOk = 0,
  kInputMissing = 2,
  kValidation = 3,
  kInfeasibleConfig = 4,
  kInternal = 5,
};

/// Runs one command. `args` excludes the program name. Results go to the
/// configured output file, or to `out` when none is set; diagnostics and log
/// lines go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pairflow::cli
