#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lvrnn/envs/envs.hpp"
#include "lvrnn/model/snapshot.hpp"
#include "lvrnn/train/losses.hpp"
#include "lvrnn/train/optim.hpp"

namespace lvrnn::train {

enum class Regime { Full, Finetune, Posthoc };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// Random stream phases. Every draw of a run comes from
/// envs::stream(seed, step, phase), so runs are reproducible per (config, seed).
enum class Phase : std::uint64_t { Init = 0, Tasks = 1, Environment = 2, Latents = 3, Evaluation = 4, Head = 5 };

struct Schedule {
  std::size_t updates = 500;
  std::size_t batch = 64;
  std::size_t horizon = 0;  // 0: domain default
  /// Fractions of `updates` after which a snapshot is kept (the final model is
  /// always returned).
  std::vector<double> snapshot_fractions{0.5, 0.75};
};

struct TrainConfig {
  envs::Domain domain = envs::Domain::Bandit;
  model::Architecture architecture;
  model::PosteriorConfig posterior;
  LossConfig loss;
  PpoConfig ppo;
  OptimizerConfig optimizer;
  Schedule schedule;

  std::size_t horizon() const { return schedule.horizon ? schedule.horizon : envs::horizon(domain); }
  /// Throws model::ConfigError naming the offending field.
  void validate() const;
};

/// Desk-scale architecture for a domain.
model::Architecture default_architecture(envs::Domain d);

/// Desk-scale defaults: batch 64, the desk architecture and a per-domain update
/// count. The learning rate is 3e-3 to make up for the much shorter schedule.
TrainConfig desk_config(envs::Domain d, model::PosteriorConfig posterior = {});

struct UpdateStats {
  std::size_t step = 0;  // 1-based update index
  double loss = 0.0;
  double data_term = 0.0;
  double kl = 0.0;
  double grad_norm = 0.0;
  /// Mean undiscounted return per trajectory (RL) or mean predictive NLL (regression).
  double performance = 0.0;
  bool applied = false;
};

struct SnapshotPoint {
  std::size_t step = 0;
  model::Snapshot snapshot;
};

struct RegimeResult {
  model::Snapshot final_model;
  std::vector<UpdateStats> history;
  std::vector<SnapshotPoint> snapshots;
  std::size_t optimizer_steps = 0;
  std::size_t skipped_updates = 0;
};

using UpdateCallback = std::function<void(const UpdateStats&)>;

/// One optimisation update on a fresh batch of training tasks.
UpdateStats train_step(model::ParamSet& params, const model::Architecture& arch, const TrainConfig& cfg, AdamW& opt,
                       std::uint64_t seed, std::size_t step);

/// Full: train `cfg.posterior` from scratch. Finetune: load `snapshot` under
/// `cfg.posterior` and continue training. Posthoc: load `snapshot` under a
/// Laplace or Dirac posterior and return it without any optimizer step.
/// A missing snapshot raises model::SnapshotError.
RegimeResult run_regime(Regime regime, const TrainConfig& cfg, std::uint64_t seed,
                        const std::optional<std::filesystem::path>& snapshot = std::nullopt,
                        const UpdateCallback& on_update = {});

model::Snapshot to_snapshot(const model::Model& m);

}  // namespace lvrnn::train
