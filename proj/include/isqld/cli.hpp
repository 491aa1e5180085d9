#pragma once

// Command-line front end.
//
//   isqld <command> [--config FILE] [flags]
//
// Commands: psi, simulate, surface, rate, overflow, ruin, verify. Settings
// come from an optional JSON config object; flags given on the command line
// override the file. Distributions are JSON objects (see distributions.hpp),
// passed on the command line as e.g.
//   --service '{"kind":"uniform","low":0,"high":1}'
//
// Files are written to --out, else $ISQLD_OUTPUT_DIR, else the working
// directory. Exit status: 0 success, 2 configuration error, 3 event not
// rare (infeasible problem), 4 numerical failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace isqld::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitNumeric = 4;

/// Runs one command; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace isqld::cli
