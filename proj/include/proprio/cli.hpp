#pragma once

#include <string>
#include <vector>

namespace proprio {

// The whole command-line surface; `args` excludes the program name.
// Returns the process exit code: 0 on success, 1 on a runtime failure,
// 2 on a usage error.
int run_command(const std::vector<std::string>& args);

}  // namespace proprio
