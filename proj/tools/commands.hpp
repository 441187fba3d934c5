#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gml::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

/// Entry point shared by the executable and the CLI tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gml::cli
