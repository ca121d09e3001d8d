#pragma once

#include <iosfwd>

namespace drifa {

// Entry point for the drifa binary.  Exit codes: 0 success, 2 configuration
// error, 3 data error, 4 checkpoint error, 1 anything else.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace drifa
