#pragma once

#include <iosfwd>

namespace sfg::cli {

enum ExitCode : int { ok = 0, usage = 1, data_error = 2, numerical_failure = 3 };

/// Runs one `sfg` invocation. Messages go to `out`/`err`; the return value
/// is the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sfg::cli
