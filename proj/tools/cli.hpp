#pragma once

#include <iosfwd>

namespace fscil {

// Parses argv, dispatches a subcommand and returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fscil
