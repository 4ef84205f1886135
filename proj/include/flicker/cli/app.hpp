#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flicker {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// The flickersim command line: train, eval, verify, verify-prop1,
// oracle-check and aggregate. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flicker
