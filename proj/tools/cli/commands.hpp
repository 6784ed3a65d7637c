// Subcommands of the osn tool, callable in-process for testing.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace osn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitFitFlagged = 2;
inline constexpr int kSchemaVersion = 1;

/// `args` excludes the program name. Results go to `out` unless a subcommand
/// writes a file; errors are reported as one JSON object on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace osn
