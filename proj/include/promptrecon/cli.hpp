// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Command-line front end. Each pipeline stage is a subcommand that reads and
// writes the declared file formats; logs go to the error stream as one JSON
// object per line.

#include <iosfwd>
#include <string>
#include <vector>

#include "promptrecon/error.hpp"

namespace promptrecon::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitBackend = 3,
};

/// kBackend maps to kExitBackend; every other library error to kExitData.
int exit_code_for(ErrorCode code) noexcept;

/// `args` excludes the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace promptrecon::cli
