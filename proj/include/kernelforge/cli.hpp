#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kernelforge {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;  // bad flags, unreadable or unwritable files
inline constexpr int kExitDiverged = 2;

/// Entry point for the `kernelforge` command:
///   kernelforge synth        write synthetic CSVs plus a JSON ground-truth sidecar
///   kernelforge train        train a general kernel model, write model + run record
///   kernelforge fixed-point  fixed-point / variance report as JSON
///   kernelforge benchmark    test error over a (p, n) grid as CSV
/// Thread count comes from --threads, else KERNELFORGE_THREADS, else 1.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kernelforge
