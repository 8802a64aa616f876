// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: gen, train, eval, ablate, gradcheck.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error (unknown flag, missing file,
// invalid option value). Nothing is written when argument parsing fails.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace midg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// `args` includes the program name in position 0.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

/// Parses flat `key = value` text; '#' starts a comment. Throws ParseError on a line without '='.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);

}  // namespace midg::cli
