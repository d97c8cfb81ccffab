#pragma once

#include <string>
#include <vector>

namespace tomo::cli {

inline constexpr const char* kVersion = "0.1.0";

// Dispatches a full command line (without the program name) to a subcommand.
// Returns the process exit code: 0 success, 1 user error (bad flags, bad
// input files), 2 internal error. Every completed run writes one JSON
// manifest recording the resolved parameters and per-stage wall times.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

// Help text, also what `--help` prints; exposed for snapshot tests.
std::string usage_text();
std::string usage_text(const std::string& subcommand);

}  // namespace tomo::cli
