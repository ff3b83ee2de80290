#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oal {

/// Entry point behind the command-line binary, separated from main() so the
/// exit-code and output contracts are testable in-process.
/// Returns 0 on success, 1 on usage errors, 2 on runtime/numeric failures.
int run_cli(const std::vector<std::string>& args, std::istream& in,
            std::ostream& out, std::ostream& err);

}  // namespace oal
