#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sabr::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kCheckpoint = 3,
};

// Entry point shared by the `sabr` binary and the CLI tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sabr::cli
