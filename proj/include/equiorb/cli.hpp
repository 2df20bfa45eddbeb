#pragma once

#include "equiorb/optimizer.hpp"
#include "equiorb/orbit_io.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace equiorb {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;        ///< bad arguments or unparsable input
inline constexpr int kExitComputation = 2;  ///< computation failed

/// Batch minimization job. Restart i uses seed config.seed + i.
///
/// As a JSON file: {"group": path, "s", "nu", "restarts", "out",
/// "config": {...}}; relative paths resolve against the manifest directory.
struct RunManifest {
  std::filesystem::path group_file;
  int s = 12;
  std::optional<int> nu;  ///< default_nu(s) when unset
  MinimizeConfig config;
  std::filesystem::path out_dir = "out";
  int restarts = 1;
  /// Refuse non-coercive groups instead of warning.
  bool require_coercive = false;

  int effective_nu() const { return nu.value_or(default_nu(s)); }
  /// Throws ParseError unless the group file exists and restarts >= 1.
  void validate() const;
};

RunManifest load_manifest(const std::filesystem::path& file);
nlohmann::json to_json(const RunManifest& m);

/// Print the group diagnostics. Returns an exit code.
int cmd_check(const std::filesystem::path& group_file, std::ostream& out, std::ostream& err);

struct RunResult {
  SummaryRow row;
  std::optional<std::filesystem::path> record_file;
  std::filesystem::path history_file;
};

/// Run every restart, writing orbit_<seed>.json for converged runs,
/// history_<seed>.csv for every run and summary.csv. Throws Error before any
/// computation when the output directory is not writable.
std::vector<RunResult> cmd_minimize(const RunManifest& manifest, std::ostream& log);

/// Full-period trajectory with `resolution` intervals over [0, l]
/// (default nu * l). Throws SymmetryViolation on junction mismatch.
void cmd_sample(const std::filesystem::path& orbit_file, std::optional<int> resolution,
                std::ostream& out);

/// Entry point of the command-line tool.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace equiorb
