// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/cli.hpp"

int main(int argc, char** argv) { return promptrecon::cli::run(argc, argv); }
