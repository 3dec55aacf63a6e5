#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lvrnn/belief/gaussian.hpp"

namespace lvrnn::model {

using belief::CovarianceKind;

/// Invalid or self-contradictory configuration. `field` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Family { Dirac, VRNN, LaplaceStationary, LaplaceMarkov, LaplaceWindowed };
enum class Accumulate { MeanAndPrecision, PrecisionOnly };

std::string to_string(Family f);
Family family_from_string(const std::string& s);
std::string to_string(Accumulate a);
Accumulate accumulate_from_string(const std::string& s);

bool is_laplace(Family f);

/// Which posterior the recurrent state is turned into.
///
/// LaplaceStationary recomputes the precision over the whole history and never
/// accumulates. LaplaceMarkov uses only the newest observation and adds the
/// previous posterior (history_window = 1, latent_window = 1).
/// LaplaceWindowed uses the last `history_window` observations and accumulates
/// iff `latent_window` = 1; with latent_window = 0 it is the windowed
/// stationary posterior.
struct PosteriorConfig {
  Family family = Family::Dirac;
  std::optional<CovarianceKind> covariance;
  Accumulate accumulate = Accumulate::PrecisionOnly;
  std::size_t history_window = 1;  // k_H
  std::size_t latent_window = 1;   // k_Z

  /// Throws ConfigError on contradictions.
  void validate() const;

  /// Number of past inputs entering the precision; 0 means the whole history.
  std::size_t effective_history_window() const;
  bool accumulates() const;
  bool sums_means() const { return accumulates() && accumulate == Accumulate::MeanAndPrecision; }
  CovarianceKind covariance_or_default() const { return covariance.value_or(CovarianceKind::Full); }

  /// Canonical preset for a family with the given covariance kind.
  static PosteriorConfig preset(Family family, std::optional<CovarianceKind> covariance = std::nullopt);

  friend bool operator==(const PosteriorConfig&, const PosteriorConfig&) = default;
};

enum class HeadKind { Policy, Regression };

/// Network sizes. Defaults follow the reference architecture: two 256-wide
/// embedding layers, a 128-unit LSTM, and (256, 256, 64) output heads.
struct Architecture {
  std::size_t observation_dim = 1;
  std::size_t num_actions = 0;  // 0: no action input (regression)
  HeadKind head = HeadKind::Regression;
  bool policy_uses_state = true;
  std::vector<std::size_t> embed_hidden{256, 256};
  std::size_t lstm_hidden = 128;
  std::size_t latent_dim = 32;
  std::vector<std::size_t> head_hidden{256, 256, 64};
  double leaky_slope = 0.01;

  void validate() const;
  std::size_t embed_dim() const { return embed_hidden.back(); }
  /// Width of the concatenated embedded (state, action, reward) input.
  std::size_t input_dim() const { return embed_dim() * (num_actions > 0 ? 3 : 2); }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

}  // namespace lvrnn::model
