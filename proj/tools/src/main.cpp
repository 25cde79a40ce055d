// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "cfsam_app/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cfsam::app::run_cli(args, std::cout, std::cerr);
}
