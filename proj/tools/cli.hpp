#pragma once

namespace merge::cli {

/// Runs one subcommand. Exit codes: 0 success, 1 runtime/data error,
/// 2 usage error, 3 training divergence.
int dispatch(int argc, char** argv);

} // namespace merge::cli
