#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lvrnn/train/regime.hpp"

namespace lvrnn::cli {

/// How a trained model is evaluated on held-out tasks.
struct EvalProtocol {
  std::size_t tasks = 32;                                 // B test tasks
  std::size_t samples = 30;                               // m predictive samples (regression)
  bool act_at_mean = false;                               // act at the belief mean instead of sampling
  bool greedy = false;                                    // argmax actions

  friend bool operator==(const EvalProtocol&, const EvalProtocol&) = default;
};

/// Value lists of the ablation axes. An empty list keeps the base value.
struct GridAxes {
  std::vector<std::size_t> latent_dim;
  std::vector<belief::CovarianceKind> covariance;
  std::vector<double> beta;
  std::vector<std::size_t> n_z;
  std::vector<std::size_t> history_window;  // k_H
  std::vector<std::size_t> latent_window;   // k_Z
  std::vector<model::Accumulate> accumulate;

  friend bool operator==(const GridAxes&, const GridAxes&) = default;
};

/// The exhaustive ablation grid: latent dim {32, 64}, full or diagonal
/// covariance, β ∈ {1, 1e-2, 1e-4}, n_Z ∈ {1, 5}, k_H ∈ {1, 10}, k_Z ∈ {0, 1}
/// and both accumulation modes.
GridAxes full_grid_axes();

struct ExperimentConfig {
  std::string id;
  train::TrainConfig train;
  std::vector<std::uint64_t> seeds{1};
  EvalProtocol eval;
  std::optional<GridAxes> grid;

  /// Throws model::ConfigError naming the offending field.
  void validate() const;
};

/// Parses the YAML configuration. Unset keys take the desk-scale defaults of
/// the domain; unknown keys and malformed values raise model::ConfigError.
ExperimentConfig parse_config(const std::string& yaml);
ExperimentConfig load_config(const std::filesystem::path& path);

/// YAML with every default materialized, readable by parse_config.
std::string resolved_config(const ExperimentConfig& cfg);

/// Replaces the posterior family, keeping the configured covariance kind.
void set_family(ExperimentConfig& cfg, model::Family family);

struct GridExpansion {
  std::vector<ExperimentConfig> configs;
  std::vector<std::string> skipped;  // one reason per rejected combination
};

/// Cartesian product of the axes that apply to the configured family. Axes
/// that do not apply are left at the base value; invalid combinations are
/// skipped with a reason. Each configuration gets an id suffix naming its
/// axis values.
GridExpansion expand_grid(const ExperimentConfig& base, const GridAxes& axes);

}  // namespace lvrnn::cli
