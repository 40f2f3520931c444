// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace qselect {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitBackend = 4,
  kExitInternal = 5,
};

/// Entry point of the `qselect` tool. Data goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qselect
