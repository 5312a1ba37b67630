#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lcwr::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kNotConverged = 3,
};

// Runs one command line. args[0] is the program name. "-" as a file argument
// means `in` (for inputs) or `out` (for outputs). Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace lcwr::cli
