#pragma once

#include <ostream>

namespace crossgrasp::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 2;
inline constexpr int kNumericError = 3;

/// Parses argv and runs one subcommand. Diagnostics go to `err` as a single line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crossgrasp::cli
