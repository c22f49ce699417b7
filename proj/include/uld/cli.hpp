#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace uld::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitUsage = 2;

/// Runs one invocation. `args` excludes the program name. Data goes to `out`,
/// diagnostics and usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uld::cli
