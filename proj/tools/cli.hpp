// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// The `cinn` command line tool. run_cli is the whole program minus main(), so
// tests can drive it in-process.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cinn::cli {

enum ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kDiverged = 4,
  kIo = 5,
};

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cinn::cli
