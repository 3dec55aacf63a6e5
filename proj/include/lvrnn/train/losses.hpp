#pragma once

#include <cstdint>
#include <vector>

#include "lvrnn/envs/envs.hpp"
#include "lvrnn/model/model.hpp"

namespace lvrnn::train {

using model::Model;
using model::PrecisionCache;
using num::Tensor;
using num::Var;

struct LossConfig {
  double beta = 1e-2;   // weight of KL(q_t || stopgrad(q_{t-1}))
  std::size_t n_z = 1;  // latent samples averaged by the predictive
  void validate() const;
};

struct PpoConfig {
  double gae_lambda = 0.9;
  double clip = 0.2;
  double value_scale = 1.0;
  double policy_scale = 1.0;
  double entropy_scale = 0.1;
  std::size_t epochs = 1;
  bool standardize_advantages = false;
};

struct LossResult {
  double loss = 0.0;
  double data_term = 0.0;  // predictive NLL or PPO surrogate part
  double kl = 0.0;         // mean consecutive KL (0 for Dirac)
  std::vector<Tensor> grads;
};

// ---------------------------------------------------------------- supervised

/// B regression datasets of equal length T, stored time-major.
struct RegressionBatch {
  Tensor x;  // [T x B]
  Tensor y;  // [T x B]
  std::size_t horizon() const { return x.dim(0); }
  std::size_t batch() const { return x.dim(1); }
};

RegressionBatch make_regression_batch(const std::vector<envs::FourierDataset>& data);

/// Gaussian negative log-likelihood per element: ½ln(2πv) + (y − μ)²/(2v).
Var gaussian_nll(const Var& mean, const Var& variance, const Tensor& target);

/// At every t the target y_t is predicted at x_t from q(Z | H_{<t}) and then
/// (x_t, y_t) is fed to the recurrence. The loss is the mean NLL per point
/// plus β times the mean consecutive KL (skipped for Dirac).
Var supervised_loss(model::Recurrence& rec, const RegressionBatch& batch, const LossConfig& cfg,
                    std::mt19937_64& latent_rng, double* nll_out = nullptr, double* kl_out = nullptr);

/// Loss and parameter gradients. Latents are drawn from `latent_seed`.
LossResult supervised_elbo(const Model& model, const LossConfig& cfg, const RegressionBatch& batch,
                           std::uint64_t latent_seed, PrecisionCache* cache = nullptr, bool with_grad = true);

// ---------------------------------------------------------------- reinforcement learning

struct RolloutOptions {
  std::size_t n_z = 1;
  bool greedy = false;          // argmax actions (lowest index on ties) instead of sampling
  bool latent_mean = false;     // act at the belief mean instead of sampling latents
  bool record_posterior = false;
};

/// Interaction record of B trajectories of length T. Decision-time
/// observations are obs[t], t = 0..T (obs[T] is the bootstrap state).
struct Rollout {
  std::size_t batch = 0, horizon = 0;
  std::vector<envs::Task> tasks;
  std::vector<Tensor> observations;               // [T + 1] of [B x obs]
  std::vector<std::vector<std::size_t>> actions;  // [T][B]
  Tensor rewards, discounts, log_probs;           // [T x B]
  Tensor values;                                  // [(T + 1) x B]
  /// Posterior statistics after each step, if recorded ([T x B]); the KL at
  /// t = 0 is against the prior belief.
  Tensor entropy, consecutive_kl;
  std::uint64_t latent_seed = 0;
  std::size_t n_z = 1;
  bool latent_mean = false;

  /// Undiscounted reward sum per trajectory.
  std::vector<double> returns() const;
};

/// Runs the policy on `tasks` without recording gradients. Environment and
/// action randomness come from per-trajectory streams of `env_seed`.
Rollout collect_rollout(const Model& model, envs::Domain domain, const std::vector<envs::Task>& tasks,
                        std::size_t horizon, std::uint64_t env_seed, std::uint64_t latent_seed,
                        const RolloutOptions& options = {});

/// δ_t = r_t + d_t V_{t+1} − V_t,  A_t = δ_t + d_t λ A_{t+1}, with per-transition
/// discounts d_t (0 at episode boundaries). Inputs are [T x B] and [(T+1) x B].
Tensor gae(const Tensor& rewards, const Tensor& discounts, const Tensor& values, double lambda);

/// Exact entropy of the categorical distributions given by row-wise log-probs.
Var categorical_entropy(const Var& log_probs);

/// Clipped surrogate min(ρA, clip(ρ, 1 − ε, 1 + ε)A) elementwise.
Var clipped_surrogate(const Var& ratio, const Tensor& advantages, double clip);

/// PPO objective to minimize, re-running the recurrence over the stored
/// rollout with the same latent noise stream:
///   policy_scale·(−surrogate) + value_scale·½(V − R)² − entropy_scale·H + β·KL.
LossResult ppo_loss(const Model& model, const PpoConfig& ppo, const LossConfig& cfg, const Rollout& rollout,
                    PrecisionCache* cache = nullptr, bool with_grad = true);

}  // namespace lvrnn::train
