#pragma once

#include <iosfwd>

namespace franson::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kIo = 3,
  kConvergence = 4,
  kInternal = 5,
};

/// Entry point of the `franson` tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace franson::cli
