#pragma once

#include <ostream>

namespace uflst {

// Subcommands train | cluster | eval | gradcheck | synth. Returns 0 on
// success, 2 for bad flags or configuration, 1 for runtime failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace uflst
