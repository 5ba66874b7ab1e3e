#pragma once

#include <string>
#include <vector>

namespace pmlda::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,      ///< bad flags or invalid values
  kIoFailure = 2,  ///< unreadable or malformed files
  kInternal = 3,
};

/// Entry point for the `pmlda` executable: `pmlda <unmix|generate|evaluate> [flags]`.
/// `args` excludes the program name. Output that is not a file goes to the
/// given streams.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace pmlda::cli
