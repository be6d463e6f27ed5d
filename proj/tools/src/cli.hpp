#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace unlearn::tools {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitNumeric = 4;

// Runs the `unlearn` command line. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace unlearn::tools
