#pragma once

#include <ostream>

namespace cbpl::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kInvalid = 1, kNotConverged = 2 };

/// Parses argv and runs one subcommand. Results go to `out`, diagnostics and usage to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cbpl::cli
