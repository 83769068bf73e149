#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "corpusforge/config.h"

namespace corpusforge {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitTransport = 3,
};

// Runs one command line. `args` excludes the program name. Diagnostics go to
// `err`; only `config default` writes to `out`.
int run_cli(const std::vector<std::string>& args, const Environment& env, std::ostream& out,
            std::ostream& err);

// CORPUSFORGE_* variables of the running process.
Environment process_environment();

}  // namespace corpusforge
