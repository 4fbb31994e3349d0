#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dsrl::cli {

// Runs the command line `args` (without the program name). Machine output
// goes to `out`, diagnostics to `err`. Returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dsrl::cli
