#pragma once

#include <iosfwd>

namespace ctxbias {

// Exit codes: 0 success, 1 runtime failure (including a failed gradcheck),
// 2 usage error (unknown flag or subcommand, malformed value).
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctxbias
