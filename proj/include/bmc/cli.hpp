#pragma once

#include <iosfwd>

namespace bmc {

// Entry point behind the bmc executable. Subcommands: simulate, fit,
// benchmark, report. Returns the process exit code; failures print a one-line
// JSON object {"error": {"command", "type", "message"}} to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bmc
