#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ngmpn::cli {

enum ExitCode { kOk = 0, kDomain = 1, kUsage = 2 };

/// Runs one command line (args[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ngmpn::cli
