#ifndef SGDGP_CLI_HPP
#define SGDGP_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace sgdgp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `sgdgp` tool. `args` excludes the program name.
/// Subcommands: simulate, fit, predict, diagnose, experiment.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace sgdgp

#endif // SGDGP_CLI_HPP
