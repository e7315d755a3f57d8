#pragma once

#include <string>
#include <vector>

namespace diffad {

// Parses argv and runs one subcommand (gen | train | eval | sweep |
// keywords). Exit-code contract: 0 success, 1 configuration/data error,
// 2 internal invariant violation.
int run_cli(int argc, const char* const* argv);

// Convenience for tests: args without the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace diffad
