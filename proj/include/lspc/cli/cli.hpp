#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lspc::cli {

/// Process exit statuses.
enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3, kAcceptance = 4 };

/// Parses `args` (program name first) and runs the selected subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// Applies LSPC_FP_MODE ("strict" default, or "fast" for flush-to-zero and
/// denormals-are-zero). Unknown values are usage errors.
void apply_fp_mode(const char* value);

}  // namespace lspc::cli
