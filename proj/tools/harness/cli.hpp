#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace stokit::harness {

// The stokit command line. `args` excludes the program name; `env_seed` is
// the value of STOKIT_SEED, if set. Returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or validation error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::optional<std::string>& env_seed);

}  // namespace stokit::harness
