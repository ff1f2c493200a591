#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mfclust {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

int run_cli(int argc, const char* const* argv);
// args excludes the program name; output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mfclust
