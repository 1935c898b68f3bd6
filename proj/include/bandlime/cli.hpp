#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bandlime::cli {

enum ExitCode : int {
  kOk = 0,
  kBadArguments = 2,
  kIoFailure = 3,
  kPredictorFailure = 4,
};

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bandlime::cli
