#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vrlr {

// Exit codes: 0 success (all requested checks passed), 1 a check failed or the
// run could not complete, 2 usage or configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace vrlr
