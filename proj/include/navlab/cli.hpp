#pragma once

namespace navlab {

/// Entry point of the navlab tool. Exit codes: 0 success, 1 validation
/// error (bad flags, config or input files), 2 runtime failure.
int run_cli(int argc, char** argv);

}  // namespace navlab
