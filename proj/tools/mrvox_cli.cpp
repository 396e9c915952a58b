// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrvox/cli.hpp"

int main(int argc, char** argv) { return mrvox::cli::run(argc, argv); }
