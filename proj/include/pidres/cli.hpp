#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pidres {

/// Runs one CLI invocation (args excludes the program name). Returns 0 on
/// success, 1 for user errors, 2 for internal failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pidres
