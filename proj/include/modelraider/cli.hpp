#ifndef MODELRAIDER_CLI_HPP
#define MODELRAIDER_CLI_HPP

#include <iosfwd>

namespace modelraider {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPipelineError = 1;
inline constexpr int kExitUsage = 2;

/// Subcommands: make-fixtures, scan, fingerprint, identify, attack, bench,
/// replay. Returns 0 on success, 1 on a pipeline error, 2 on a usage error.
int cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace modelraider

#endif // MODELRAIDER_CLI_HPP
