#pragma once

namespace lundq::cli {

/// Whole command-line surface, callable in-process. Returns the process
/// exit code: 0 success, 2 usage or configuration error, 3 data error,
/// 1 anything unexpected.
int run_cli(int argc, const char* const* argv);

}  // namespace lundq::cli
