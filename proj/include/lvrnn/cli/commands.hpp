#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lvrnn/cli/experiment.hpp"
#include "lvrnn/cli/metrics.hpp"
#include "lvrnn/cli/plot.hpp"

namespace lvrnn::cli {

enum class Command { Train, Finetune, Posthoc, Eval };

std::string to_string(Command c);

struct RunOptions {
  std::filesystem::path out_root;
  /// Required by finetune, posthoc and eval. "{seed}" is replaced by the seed.
  std::optional<std::filesystem::path> snapshot;
  std::size_t jobs = 1;  // seeds evaluated concurrently
};

/// $LVRNN_OUT_ROOT, or "runs" when unset.
std::filesystem::path default_out_root();

std::filesystem::path snapshot_for_seed(const std::filesystem::path& pattern, std::uint64_t seed);

/// Evaluation rows of one model: per-timestep predictive CE (regression), or
/// the return at T, cumulative regret for t = 1..T and, for Gaussian
/// posteriors, entropy and consecutive KL for t = 2..T. Each row aggregates
/// the test tasks.
std::vector<MetricsRow> evaluation_rows(const model::Model& model, const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs every seed and writes the run directory out_root/<id>: config.resolved,
/// metrics.csv, snapshots/, plots/ and manifest.json (the only file with
/// timestamps). Returns the directory.
std::filesystem::path run_experiment(Command cmd, const ExperimentConfig& cfg, const RunOptions& opts);

/// Expands the configured axes (or the full ablation grid) and runs every
/// valid combination. Skipped combinations are logged.
std::vector<std::filesystem::path> run_grid(Command cmd, const ExperimentConfig& cfg, const RunOptions& opts);

/// Rows grouped by (experiment, phase, step, metric) and aggregated over
/// seeds and runs with the 99% interval; seed is "all".
std::vector<MetricsRow> aggregate_rows(const std::vector<MetricsRow>& rows);

/// Reads run directories (or metrics files), writes out/stats.csv and the
/// plots under out/plots. Throws SchemaError listing every offending file.
std::vector<MetricsRow> run_stats(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out);

/// Writes the standard plots of aggregated rows into `dir`; returns the files.
std::vector<std::filesystem::path> write_plots(const std::vector<MetricsRow>& aggregated,
                                               const std::filesystem::path& dir);

}  // namespace lvrnn::cli
