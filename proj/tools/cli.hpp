#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace comaguard::cli {

enum ExitCode : int { kOk = 0, kDivergence = 1, kUsage = 2 };

/// Entry point of the comaguard tool; args excludes the program name.
/// Subcommands: run, gen, verify, serve.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace comaguard::cli
