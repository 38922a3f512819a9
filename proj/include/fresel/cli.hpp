#pragma once

namespace fresel::cli {

// Full command line driver. Returns the process exit code: 0 success,
// 2 config error, 3 data error, 4 solver non-convergence under --strict.
int run(int argc, char** argv);

}  // namespace fresel::cli
