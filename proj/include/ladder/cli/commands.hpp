#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ladder::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartial = 2;  // some items failed; see failures.jsonl

/// Entry point of the `ladder` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace ladder::cli
