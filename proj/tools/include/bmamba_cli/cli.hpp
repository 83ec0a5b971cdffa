#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bmamba::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,  // gradcheck or bench correctness gate failed, or an internal error
  kConfigError = 2,  // bad arguments, unreadable or inconsistent files
  kNumericError = 3, // non-finite loss or gradient during training
};

/// Runs `bmamba <args...>` in-process. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bmamba::cli
