#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "entroshape/config.hpp"

namespace entroshape::cli {

/// Process exit codes.
enum ExitCode : int {
  kSuccess = 0,
  kConfigOrIoError = 1,
  kVerificationFailure = 2,
  kDivergence = 3,
};

inline constexpr const char* kToolVersion = "0.1.0";

/// Options common to every command (after flag and environment resolution).
struct CommandContext {
  ExperimentConfig config;
  std::string command;
  std::string out_dir;
  std::ostream* log = nullptr;
};

int cmd_grad_check(const CommandContext& ctx);
int cmd_train(const CommandContext& ctx);
int cmd_noise_bench(const CommandContext& ctx);
int cmd_imbalance(const CommandContext& ctx);
int cmd_influence(const CommandContext& ctx);
int cmd_entropy_curve(const CommandContext& ctx);
int cmd_pca(const CommandContext& ctx);

/// Parses argv, loads and validates the config, dispatches, and maps
/// exceptions onto exit codes. Diagnostics go to `err`.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a byte string / a file's contents.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// Writes manifest.json into `dir`: command, tool version, seed, the hash of
/// the resolved config and a hash per output file (manifest excluded).
void write_manifest(const std::string& dir, const CommandContext& ctx);

/// Train-run directory layout: metrics.csv, snapshots/step_XXXXXXXX.csv,
/// summary.json.
void write_run_directory(const std::string& dir, const TrajectoryBatch& batch,
                         const ExperimentReport& report);
std::vector<MetricRow> read_metrics_csv(const std::string& path);
std::vector<Snapshot> read_snapshots(const std::string& run_dir);

}  // namespace entroshape::cli
