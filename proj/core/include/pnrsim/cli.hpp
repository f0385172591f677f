#pragma once

#include <ostream>
#include <string_view>

namespace pnrsim::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 1;
inline constexpr int exit_runtime = 2;

/// Version string written into every artifact header.
[[nodiscard]] std::string_view version();

/// Entry point of the `pnrsim` tool. Parses `argv`, runs one subcommand and
/// writes its artifacts into the output directory. Progress goes to `out`,
/// diagnostics to `err`. Returns exit_ok, exit_validation for bad flags or
/// configuration, exit_runtime for failures during the run.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pnrsim::cli
