#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fusionret::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;  // validation, format or I/O failure
inline constexpr int kExitUsage = 2;

/// Runs the `fusionret` command line. argv[0] is the program name.
///
/// Subcommands: sim, eval, ensemble, select, losses-check, lhp-sample, synth.
/// Reports go to `out`, warnings and errors to `err`.
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace fusionret::cli
