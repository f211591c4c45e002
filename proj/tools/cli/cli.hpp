#pragma once

#include <iosfwd>

namespace actsteer::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDegenerate = 4;
inline constexpr int kExitGridMismatch = 5;

// actsteer {corpus|extract|search|steer|sweep} [flags]. Reports go to out,
// progress and diagnostics to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace actsteer::cli
