#pragma once

#include <iosfwd>

namespace regfact {

/// Entry point of the `regfact` command-line tool. Returns 0 on success, 2 on
/// usage errors and 1 when a run fails (bad input file, dimension mismatch).
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace regfact
