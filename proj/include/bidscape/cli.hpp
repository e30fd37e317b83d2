#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bidscape {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

/// Command-line entry point. args[0] is the program name. Results go to
/// `out`, diagnostics to `err`.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_main(int argc, const char* const* argv);

}  // namespace bidscape
