// SPDX-License-Identifier: Apache-2.0
#include "midg/cli.hpp"

int main(int argc, char** argv) { return midg::cli::run_cli(argc, argv); }
