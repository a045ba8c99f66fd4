// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xtal {

inline constexpr int exit_ok = 0;
inline constexpr int exit_domain_failure = 1;       // failed session, invalid inputs
inline constexpr int exit_environment_failure = 2;  // unreachable backend, unreadable files

/// Entry point of the `xtal` binary. `args` excludes the program name.
/// Interactive prompts read `in` line by line.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

} // namespace xtal
