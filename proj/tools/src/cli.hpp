#pragma once

#include <ostream>

namespace bonelayer::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNotConverged = 2;

/// Entry point shared by the executable and the tests. Results go to `out`,
/// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bonelayer::cli
