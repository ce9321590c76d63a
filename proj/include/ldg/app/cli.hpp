#pragma once

#include <iosfwd>

namespace ldg::app {

/// Parses argv, runs one subcommand, returns the process exit status. Failures
/// print a single "error: ..." line to `err`.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ldg::app
