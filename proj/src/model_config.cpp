#include "lvrnn/model/config.hpp"

namespace lvrnn::model {

std::string to_string(Family f) {
  switch (f) {
    case Family::Dirac: return "dirac";
    case Family::VRNN: return "vrnn";
    case Family::LaplaceStationary: return "laplace_stationary";
    case Family::LaplaceMarkov: return "laplace_markov";
    case Family::LaplaceWindowed: return "laplace_windowed";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "dirac" || s == "rnn") return Family::Dirac;
  if (s == "vrnn") return Family::VRNN;
  if (s == "laplace_stationary") return Family::LaplaceStationary;
  if (s == "laplace_markov") return Family::LaplaceMarkov;
  if (s == "laplace_windowed") return Family::LaplaceWindowed;
  throw ConfigError("posterior.family", "unknown family '" + s +
                                            "' (expected dirac|vrnn|laplace_stationary|laplace_markov|laplace_windowed)");
}

std::string to_string(Accumulate a) { return a == Accumulate::MeanAndPrecision ? "mean_and_precision" : "precision_only"; }

Accumulate accumulate_from_string(const std::string& s) {
  if (s == "mean_and_precision") return Accumulate::MeanAndPrecision;
  if (s == "precision_only") return Accumulate::PrecisionOnly;
  throw ConfigError("posterior.accumulate", "unknown mode '" + s + "' (expected mean_and_precision|precision_only)");
}

bool is_laplace(Family f) {
  return f == Family::LaplaceStationary || f == Family::LaplaceMarkov || f == Family::LaplaceWindowed;
}

void PosteriorConfig::validate() const {
  if (family == Family::Dirac) {
    if (covariance) throw ConfigError("posterior.covariance", "the dirac family has no covariance");
    return;
  }
  if (!covariance) throw ConfigError("posterior.covariance", to_string(family) + " requires a covariance kind");
  if (family == Family::VRNN) return;
  if (accumulate == Accumulate::MeanAndPrecision && !accumulates())
    throw ConfigError("posterior.accumulate", "mean accumulation needs an accumulating posterior (k_Z = 1)");
  if (latent_window > 1) throw ConfigError("posterior.latent_window", "must be 0 or 1");
  switch (family) {
    case Family::LaplaceStationary:
      if (latent_window != 0) throw ConfigError("posterior.latent_window", "laplace_stationary does not accumulate (k_Z must be 0)");
      break;
    case Family::LaplaceMarkov:
      if (history_window != 1) throw ConfigError("posterior.history_window", "laplace_markov uses only the newest observation (k_H must be 1)");
      if (latent_window != 1) throw ConfigError("posterior.latent_window", "laplace_markov accumulates the previous posterior (k_Z must be 1)");
      break;
    case Family::LaplaceWindowed:
      if (history_window < 1) throw ConfigError("posterior.history_window", "laplace_windowed needs k_H >= 1");
      break;
    default: break;
  }
}

std::size_t PosteriorConfig::effective_history_window() const {
  switch (family) {
    case Family::LaplaceStationary: return 0;
    case Family::LaplaceMarkov: return 1;
    case Family::LaplaceWindowed: return history_window;
    default: return 0;
  }
}

bool PosteriorConfig::accumulates() const {
  return family == Family::LaplaceMarkov || (family == Family::LaplaceWindowed && latent_window == 1);
}

PosteriorConfig PosteriorConfig::preset(Family family, std::optional<CovarianceKind> covariance) {
  PosteriorConfig cfg;
  cfg.family = family;
  if (family != Family::Dirac) cfg.covariance = covariance.value_or(CovarianceKind::Full);
  switch (family) {
    case Family::LaplaceStationary:
      cfg.history_window = 0;
      cfg.latent_window = 0;
      break;
    case Family::LaplaceMarkov:
      cfg.history_window = 1;
      cfg.latent_window = 1;
      break;
    case Family::LaplaceWindowed:
      cfg.history_window = 10;
      cfg.latent_window = 0;
      break;
    default: break;
  }
  return cfg;
}

void Architecture::validate() const {
  if (observation_dim == 0) throw ConfigError("model.observation_dim", "must be positive");
  if (embed_hidden.empty()) throw ConfigError("model.embed_hidden", "needs at least one layer");
  if (head_hidden.empty()) throw ConfigError("model.head_hidden", "needs at least one layer");
  if (lstm_hidden == 0) throw ConfigError("model.lstm_hidden", "must be positive");
  if (latent_dim == 0) throw ConfigError("model.latent_dim", "must be positive");
  if (head == HeadKind::Policy && num_actions < 2) throw ConfigError("model.num_actions", "a policy head needs >= 2 actions");
}

}  // namespace lvrnn::model
