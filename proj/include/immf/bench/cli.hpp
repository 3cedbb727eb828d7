#pragma once

#include <iosfwd>

namespace immf::bench {

/// Entry point of the `immf` tool. Returns 0 on success, 1 on a validation
/// error (including unknown flags and failed checks) and 2 on an I/O error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace immf::bench
