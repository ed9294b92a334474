#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kicl::cli {

// Runs one invocation. Returns 0 on success, 1 on a contract violation
// (including bad flags), 2 on an I/O error. Diagnostics go to `err`, the
// human summary to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kicl::cli
