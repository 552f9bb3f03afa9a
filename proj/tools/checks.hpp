#pragma once

// Self-check suite behind `gart check`: one line per invariant with the
// tolerance and the measured value. `fault` names a deliberate corruption
// used by tests to prove a check can fail ("mask" is the only one).

#include <iosfwd>
#include <string>

namespace gart::cli {

// Returns the number of failed checks (0 == all green).
int run_checks(const std::string& fault, std::ostream& os);

}  // namespace gart::cli
