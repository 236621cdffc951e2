#pragma once

#include <iosfwd>

namespace asetrap::io {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  /// Invalid flags, config, or unreadable/ill-formed input files.
  kExitInputError = 2,
  /// Outputs written but some results are flagged unreliable, or a numerical
  /// procedure failed.
  kExitNumerical = 3,
};

/// Entry point shared by the `asetrap` binary and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace asetrap::io
