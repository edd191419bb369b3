#pragma once

namespace asyco::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kBadConfig = 2;
inline constexpr int kDiverged = 3;

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv);

}  // namespace asyco::cli
