#pragma once

#include <iosfwd>

namespace rankscl {

// Exit codes: 0 success, 1 usage/config, 2 data format, 3 numeric failure.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rankscl
