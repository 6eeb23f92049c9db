#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace derand::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInternal = 3;

/// Runs one command. `args` excludes the program name. Returns the process
/// exit code: 0 success, 1 verification failure, 2 usage or parameter error,
/// 3 precision or internal error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace derand::cli
