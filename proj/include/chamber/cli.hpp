#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace chamber {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Entry point behind the `chamber` executable. Runtime failures print one
// line "error: <Type>: <message>" to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chamber
