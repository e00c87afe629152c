#pragma once

namespace qfusion::cli {

/// Full command-line entry point (train / eval / compare / circuit /
/// data / run-experiment). Exit codes: 0 success, 1 runtime failure,
/// 2 usage or config error.
int run(int argc, const char* const* argv);

}  // namespace qfusion::cli
