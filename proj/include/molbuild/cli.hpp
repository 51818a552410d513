#pragma once

#include <ostream>

#include "molbuild/error.hpp"

namespace molbuild {

/// Process exit status for a failure kind: 2 configuration, 3 oracle,
/// 4 budget exceeded, 1 anything else.
int exit_code(ErrorKind kind);

/// Entry point of the `molbuild` executable; returns the exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace molbuild
