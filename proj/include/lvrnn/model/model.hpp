#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <variant>

#include "lvrnn/belief/gaussian.hpp"
#include "lvrnn/model/config.hpp"
#include "lvrnn/model/lstm.hpp"
#include "lvrnn/model/params.hpp"
#include "lvrnn/num/ops.hpp"

namespace lvrnn::model {

using belief::GaussianBelief;
using belief::PrecisionMatrix;

/// Parameters plus the posterior family they are interpreted under.
class Model {
 public:
  /// Fresh initialization.
  Model(Architecture arch, PosteriorConfig posterior, std::uint64_t seed);
  /// Adopts `params`; throws DimensionError if they do not match the layout.
  Model(Architecture arch, PosteriorConfig posterior, ParamSet params);

  const Architecture& architecture() const { return arch_; }
  const PosteriorConfig& posterior() const { return posterior_; }
  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }
  const Tensor& param(const std::string& name) const { return params_.values[params_.index(name)]; }

  std::size_t latent_dim() const { return arch_.latent_dim; }
  bool is_vrnn() const { return posterior_.family == Family::VRNN; }
  LstmWeights lstm_weights() const;

  struct Layer {
    std::size_t w, b;
  };
  struct Indices {
    std::vector<Layer> state_embed, action_embed, reward_embed, head;
    std::size_t lstm_w, lstm_u, lstm_b, project_w, project_b;
    Layer head_out;
    std::optional<Layer> posterior_head;
  };
  const Indices& indices() const { return idx_; }

 private:
  void bind();

  Architecture arch_;
  PosteriorConfig posterior_;
  ParamSet params_;
  Indices idx_;
};

/// Per-trajectory recurrent state.
struct PosteriorState {
  Tensor phi;     // [n]
  Tensor hidden;  // [H]
  Tensor cell;    // [H]
  Tensor accum_mean;  // [n]
  PrecisionMatrix accum_precision;
  std::deque<Tensor> history;  // embedded inputs, newest last
  std::size_t timestep = 0;
};

PosteriorState initial_state(const Model& model);

/// Inputs of one recurrent step: the observation after the transition, the
/// action that produced it (ignored without an action embedding) and the reward.
struct StepInput {
  Tensor observation;
  std::size_t action = 0;
  double reward = 0.0;
};

/// A point (Dirac family) or a Gaussian.
using Belief = std::variant<Tensor, GaussianBelief>;

/// Policy logits [A] and value, or regression mean and variance.
struct PredictiveOutput {
  Tensor logits;
  double value = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

/// Frozen stop-gradient quantities of one unroll: the per-step Laplace
/// precisions, the KL targets q_{t-1} and the accumulated past means. In
/// Record mode they are stored; in Replay mode they are reused instead of
/// being recomputed, so the loss becomes a smooth function of the parameters
/// whose gradient is exactly the one backpropagated.
struct PrecisionCache {
  enum class Mode { Record, Replay };
  Mode mode = Mode::Record;
  std::vector<std::vector<PrecisionMatrix>> steps;     // [t][b]
  std::vector<std::vector<GaussianBelief>> previous;   // [t][b]
  std::vector<std::vector<Tensor>> past_means;         // [t][b]
};

/// Batched differentiable unroll of the model on one tape.
class Recurrence {
 public:
  Recurrence(const Model& model, num::Tape& tape, std::size_t batch, PrecisionCache* cache = nullptr);
  Recurrence(const Model& model, num::Tape& tape, std::span<const PosteriorState> states);

  const Model& model() const { return model_; }
  num::Tape& tape() { return *tape_; }
  std::size_t batch() const { return batch_; }
  std::size_t timestep() const { return timestep_; }
  /// Parameter Vars in ParamSet order (gradient slots on a recording tape).
  const std::vector<Var>& params() const { return param_vars_; }

  /// Evaluation only: moves the carried state to a fresh internal tape so
  /// memory stays flat over long unrolls. Every Var obtained earlier from this
  /// unroll becomes invalid.
  void compact();

  Var embed_state(const Tensor& observations);
  void advance(const Tensor& observations, std::span<const std::size_t> actions, const Tensor& rewards);

  Var phi() const { return phi_; }
  /// Current belief mean [B x n].
  Var mean() const { return mean_; }
  /// Laplace precisions, one per trajectory (empty for Dirac and VRNN).
  const std::vector<PrecisionMatrix>& precisions() const { return precision_; }
  /// Current beliefs as values (Dirac: empty).
  std::vector<GaussianBelief> gaussians() const;
  PosteriorState state(std::size_t b) const;

  /// One latent per trajectory [B x n]; Dirac returns the mean and draws nothing.
  Var sample_latents(std::mt19937_64& rng);
  /// KL(q_t || stopgrad(q_{t-1})) per trajectory [B]; q_0 is the prior belief.
  /// Throws ContractError for the Dirac family.
  Var kl_to_previous() const;

  /// Policy head: [B x (A + 1)] logits and value.
  Var policy_head(const Var& latents, const Var& state_embedding);
  /// Regression head: [B x 2] mean and log-variance.
  Var regression_head(const Var& latents, const Var& state_embedding);
  /// Head output averaged over `k` latent samples (logits/value, or mean and
  /// variance). With `at_mean` the head is evaluated once at the belief mean.
  struct Aggregate {
    Var logits;    // [B x A] (policy)
    Var value;     // [B] (policy)
    Var mean;      // [B] (regression)
    Var variance;  // [B] (regression)
  };
  Aggregate predictive(const Var& state_embedding, std::size_t k, std::mt19937_64& rng, bool at_mean = false);

 private:
  void bind_params();
  Var mlp(const std::vector<Model::Layer>& layers, Var x, bool activate_last);
  Var embed(const Tensor& obs, std::span<const std::size_t> actions, const Tensor& rewards);
  void update_belief(const std::vector<Tensor>& phi_rows, const std::vector<Tensor>& cell_rows);

  const Model& model_;
  num::Tape* tape_;
  std::unique_ptr<num::Tape> owned_;
  std::size_t batch_;
  PrecisionCache* cache_;
  std::vector<Var> param_vars_;
  std::size_t timestep_ = 0;

  Var phi_, hidden_, cell_;
  Var mean_;
  std::vector<PrecisionMatrix> precision_;
  // VRNN factors of the current belief.
  Var log_eigs_, rotation_;
  // Previous belief as constants, for the consecutive KL.
  std::vector<Tensor> prev_mean_;
  std::vector<Tensor> prev_precision_;  // dense [n x n]
  std::vector<double> prev_logdet_cov_;

  std::vector<Tensor> accum_mean_;
  std::vector<PrecisionMatrix> accum_precision_;
  std::vector<std::deque<Tensor>> history_;
};

/// Embed, advance the LSTM and form the new belief for a single trajectory.
std::pair<PosteriorState, Belief> step(const Model& model, const PosteriorState& state, const StepInput& input);

/// Elementwise mean of equally shaped logit vectors.
Tensor average_logits(std::span<const Tensor> logits);

/// Monte-Carlo posterior predictive at `observation` with `k` latent samples.
PredictiveOutput posterior_predictive(const Model& model, const Belief& belief, const Tensor& observation,
                                      std::size_t k, std::mt19937_64& rng);

/// ∂φ_{t+1}/∂φ_t for one embedded input at the given state.
Tensor state_jacobian(const Model& model, const Tensor& embedded_input, const Tensor& phi, const Tensor& cell);

}  // namespace lvrnn::model
