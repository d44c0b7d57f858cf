#pragma once

#include <iosfwd>

namespace scralloc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the scralloc command line tool. Subcommands: aggregate,
// allocate, rorac, check, simulate, optimize, plot. Returns the process exit
// code: 0 success, 1 domain error, 2 usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scralloc::cli
