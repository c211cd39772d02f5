#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mpest::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kEstimationError = 3,
  kIoError = 4,
};

/// Runs the tool with argv-style arguments (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mpest::cli
