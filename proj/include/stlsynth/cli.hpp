#pragma once

#include <string>
#include <vector>

namespace stlsynth::cli {

// Entry point behind the stl-synth binary. argv excludes the program name.
// Exit codes: 0 success, 1 selftest/internal failure, 2 bad configuration
// or usage, 3 missing checkpoint.
int run_command(const std::vector<std::string>& argv);

// Compact invariant suite behind `stl-synth selftest`; prints one line per
// check and returns true when everything holds.
bool selftest();

}  // namespace stlsynth::cli
