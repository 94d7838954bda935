#pragma once

#include <iosfwd>

namespace focuslab {

/// Command-line entry point: synth, run, bench, train, eval-stack.
/// Returns 0 on success, 1 on a runtime error and 2 on a usage error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace focuslab
