// Batch front end: verify, pmf and simulate subcommands.
#pragma once

#include <ostream>

namespace fvkit::cli {

enum ExitCode : int { kOk = 0, kVerificationFailed = 1, kBadArguments = 2, kPrecisionExhausted = 3 };

/// Parses argv and runs one command. Tables go to `out` unless --out names a
/// file; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fvkit::cli
