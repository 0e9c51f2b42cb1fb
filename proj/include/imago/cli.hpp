#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace imago {

/// Runs the `imago` command line. `args` excludes the program name.
/// Returns 0 on success, 2 on validation errors (bad flags, bad input
/// data) and 1 on runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace imago
