#pragma once
// Batch experiments driven by a flat config file. Every run writes its CSV
// data files, summary.json and manifest.json into one output directory.
//
//   [run]
//   command = ldt            # mixing | ldt | clt | holonomy | expanding | dc-check
//   seed = 20240917
//   [ldt]
//   measure = two-atom-golden
//   ...
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mixlab {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  ///< overrides [run] out
  int workers = 1;
  std::optional<std::uint64_t> seed_override;
};

struct RunOutcome {
  int exit_code = 0;  ///< 0 all checks passed, 2 some verdict failed
  std::string verdict;
  std::filesystem::path out_dir;
  std::vector<std::filesystem::path> data_files;  ///< CSVs, in write order
};

/// Runs one experiment. Config problems throw ConfigError naming the key;
/// I/O problems throw std::runtime_error.
RunOutcome run_experiment(const std::filesystem::path& config_path, const RunOptions& opts);

/// run_experiment with errors mapped to exit code 1 and reported on `err`.
int run_command(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& out,
                std::ostream& err);

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace mixlab
