#pragma once

#include <ostream>

namespace propmatch::service {

// Exit codes of the propmatch command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;  // bad flags or flag values
inline constexpr int kExitData = 2;   // bad input files, unknown ids, missing resources

// Runs the command line. Output goes to `out`, diagnostics to `err`.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace propmatch::service
