#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace unweaver::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (without the program name). JSON lines go to
/// `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace unweaver::cli
