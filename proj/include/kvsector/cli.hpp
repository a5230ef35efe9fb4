#pragma once

// Command-line front end: analyze, sector and simulate.
// Exit codes: 0 all verdicts pass, 1 input error, 2 verdict failure.

#include <ostream>
#include <string>
#include <vector>

namespace kvsector {

constexpr int kExitPass = 0;
constexpr int kExitInputError = 1;
constexpr int kExitVerdictFailure = 2;

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kvsector
