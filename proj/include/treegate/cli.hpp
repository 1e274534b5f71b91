#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace treegate {

// Exit codes: 0 success, 1 data or numeric failure, 2 bad flags.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `treegate` tool; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace treegate
