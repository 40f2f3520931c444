// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "qselect/cli.hpp"

int main(int argc, char** argv) { return qselect::run_cli(argc, argv, std::cout, std::cerr); }
