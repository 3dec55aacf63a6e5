#include "lvrnn/train/losses.hpp"

#include "lvrnn/belief/gaussian.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>

namespace lvrnn::train {

using model::Family;
using model::Recurrence;
using num::ContractError;
using num::DimensionError;

namespace {

Tensor time_row(const Tensor& m, std::size_t t) {
  const std::size_t b = m.dim(1);
  return Tensor({b}, std::vector<double>(m.data().begin() + static_cast<std::ptrdiff_t>(t * b),
                                         m.data().begin() + static_cast<std::ptrdiff_t>((t + 1) * b)));
}

Tensor column(const Tensor& v) { return v.reshaped({v.size(), 1}); }

}  // namespace

void LossConfig::validate() const {
  if (!(beta >= 0.0)) throw model::ConfigError("loss.beta", "must be >= 0");
  if (n_z < 1) throw model::ConfigError("loss.n_z", "must be >= 1");
}

// ---------------------------------------------------------------- supervised

RegressionBatch make_regression_batch(const std::vector<envs::FourierDataset>& data) {
  if (data.empty()) throw ContractError("make_regression_batch: empty batch");
  const std::size_t t = data.front().x.size(), b = data.size();
  RegressionBatch out{Tensor({t, b}), Tensor({t, b})};
  for (std::size_t j = 0; j < b; ++j) {
    if (data[j].x.size() != t || data[j].y.size() != t)
      throw DimensionError("make_regression_batch: ragged datasets", {t}, {data[j].x.size()});
    for (std::size_t i = 0; i < t; ++i) {
      out.x(i, j) = data[j].x[i];
      out.y(i, j) = data[j].y[i];
    }
  }
  return out;
}

Var gaussian_nll(const Var& mean, const Var& variance, const Tensor& target) {
  num::Tape& tape = mean.tape();
  const Var log_var = num::log(variance);
  const Var sq = num::square(mean - tape.constant(target.reshaped(mean.shape())));
  return num::add_scalar(0.5 * log_var + 0.5 * (sq * num::exp(-log_var)), 0.5 * std::log(2.0 * std::numbers::pi));
}

Var supervised_loss(Recurrence& rec, const RegressionBatch& batch, const LossConfig& cfg, std::mt19937_64& latent_rng,
                    double* nll_out, double* kl_out) {
  cfg.validate();
  const std::size_t t_max = batch.horizon(), b = batch.batch();
  if (b != rec.batch()) throw DimensionError("supervised_loss batch", {b}, {rec.batch()});
  const bool with_kl = rec.model().posterior().family != Family::Dirac;
  num::Tape& tape = rec.tape();
  Var nll, kl;
  for (std::size_t t = 0; t < t_max; ++t) {
    const Tensor x = column(time_row(batch.x, t));
    const Tensor y = time_row(batch.y, t);
    const auto agg = rec.predictive(rec.embed_state(x), cfg.n_z, latent_rng);
    const Var step_nll = num::sum(gaussian_nll(agg.mean, agg.variance, y));
    nll = t ? nll + step_nll : step_nll;
    rec.advance(x, {}, column(y));
    if (with_kl) {
      const Var step_kl = num::sum(rec.kl_to_previous());
      kl = kl.valid() ? kl + step_kl : step_kl;
    }
  }
  const double n = static_cast<double>(t_max * b);
  Var loss = (1.0 / n) * nll;
  if (nll_out) *nll_out = nll.value().item() / n;
  if (kl_out) *kl_out = with_kl ? kl.value().item() / n : 0.0;
  if (with_kl && cfg.beta > 0.0) loss = loss + (cfg.beta / n) * kl;
  (void)tape;
  return loss;
}

LossResult supervised_elbo(const Model& model, const LossConfig& cfg, const RegressionBatch& batch,
                           std::uint64_t latent_seed, PrecisionCache* cache, bool with_grad) {
  num::Tape tape(with_grad);
  Recurrence rec(model, tape, batch.batch(), cache);
  std::mt19937_64 rng(latent_seed);
  LossResult res;
  const Var loss = supervised_loss(rec, batch, cfg, rng, &res.data_term, &res.kl);
  res.loss = loss.value().item();
  if (with_grad) res.grads = tape.grad(loss, rec.params());
  return res;
}

// ---------------------------------------------------------------- rollouts

std::vector<double> Rollout::returns() const {
  std::vector<double> out(batch, 0.0);
  for (std::size_t t = 0; t < horizon; ++t)
    for (std::size_t b = 0; b < batch; ++b) out[b] += rewards(t, b);
  return out;
}

Rollout collect_rollout(const Model& model, envs::Domain domain, const std::vector<envs::Task>& tasks,
                        std::size_t horizon, std::uint64_t env_seed, std::uint64_t latent_seed,
                        const RolloutOptions& options) {
  if (domain == envs::Domain::Fourier) throw ContractError("collect_rollout: the regression domain has no actions");
  const auto& arch = model.architecture();
  const std::size_t b_n = tasks.size(), a_n = arch.num_actions, os = arch.observation_dim;
  if (b_n == 0) throw ContractError("collect_rollout: no tasks");
  if (a_n != envs::num_actions(domain) || os != envs::observation_dim(domain))
    throw DimensionError("collect_rollout: model does not match domain " + envs::to_string(domain));
  const bool posterior = options.record_posterior && model.posterior().family != Family::Dirac;

  Rollout ro;
  ro.batch = b_n;
  ro.horizon = horizon;
  ro.tasks = tasks;
  ro.rewards = Tensor({horizon, b_n});
  ro.discounts = Tensor({horizon, b_n});
  ro.log_probs = Tensor({horizon, b_n});
  ro.values = Tensor({horizon + 1, b_n});
  if (posterior) {
    ro.entropy = Tensor({horizon, b_n});
    ro.consecutive_kl = Tensor({horizon, b_n});
  }
  ro.latent_seed = latent_seed;
  ro.n_z = options.n_z;
  ro.latent_mean = options.latent_mean;

  std::vector<envs::Rng> rngs;
  std::vector<envs::GridState> grid(b_n);
  Tensor obs({b_n, os});
  for (std::size_t b = 0; b < b_n; ++b) {
    rngs.push_back(envs::stream(env_seed, b));
    if (domain == envs::Domain::Grid) {
      const auto& task = std::get<envs::GridTask>(tasks[b]);
      grid[b] = envs::grid_reset(task);
      const Tensor o = envs::grid_observation(task.start);
      std::copy(o.data().begin(), o.data().end(), obs.data().begin() + static_cast<std::ptrdiff_t>(b * os));
    }
  }
  ro.observations.push_back(obs);

  num::Tape tape(false);
  Recurrence rec(model, tape, b_n);
  std::mt19937_64 latent_rng(latent_seed);
  std::vector<double> logp(a_n);
  for (std::size_t t = 0; t <= horizon; ++t) {
    if (t > 0) rec.compact();
    const auto agg = rec.predictive(rec.embed_state(ro.observations[t]), options.n_z, latent_rng, options.latent_mean);
    for (std::size_t b = 0; b < b_n; ++b) ro.values(t, b) = agg.value.value()[b];
    if (t == horizon) break;

    const Tensor& logits = agg.logits.value();
    std::vector<std::size_t> actions(b_n);
    Tensor next({b_n, os}), rew({b_n, 1});
    for (std::size_t b = 0; b < b_n; ++b) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < a_n; ++a) mx = std::max(mx, logits(b, a));
      double z = 0.0;
      for (std::size_t a = 0; a < a_n; ++a) z += std::exp(logits(b, a) - mx);
      for (std::size_t a = 0; a < a_n; ++a) logp[a] = logits(b, a) - mx - std::log(z);
      std::size_t act = 0;
      if (options.greedy) {
        for (std::size_t a = 1; a < a_n; ++a)
          if (logp[a] > logp[act]) act = a;
      } else {
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rngs[b]);
        act = a_n - 1;
        for (std::size_t a = 0; a < a_n; ++a) {
          u -= std::exp(logp[a]);
          if (u < 0.0) {
            act = a;
            break;
          }
        }
      }
      actions[b] = act;
      ro.log_probs(t, b) = logp[act];

      envs::Transition tr;
      if (domain == envs::Domain::Bandit) {
        tr = envs::bandit_step(std::get<envs::BanditTask>(tasks[b]), act, rngs[b]);
      } else {
        tr = envs::grid_step(std::get<envs::GridTask>(tasks[b]), grid[b], act);
      }
      ro.rewards(t, b) = tr.reward;
      ro.discounts(t, b) = tr.discount;
      rew(b, 0) = tr.reward;
      std::copy(tr.observation.data().begin(), tr.observation.data().end(),
                next.data().begin() + static_cast<std::ptrdiff_t>(b * os));
    }
    std::vector<model::GaussianBelief> before;
    if (posterior) before = rec.gaussians();
    rec.advance(next, actions, rew);
    if (posterior) {
      const auto after = rec.gaussians();
      for (std::size_t b = 0; b < b_n; ++b) {
        ro.entropy(t, b) = belief::entropy(after[b]);
        ro.consecutive_kl(t, b) = belief::kl(after[b], before[b]);
      }
    }
    ro.actions.push_back(std::move(actions));
    ro.observations.push_back(std::move(next));
  }
  return ro;
}

// ---------------------------------------------------------------- PPO

Tensor gae(const Tensor& rewards, const Tensor& discounts, const Tensor& values, double lambda) {
  const std::size_t t_n = rewards.dim(0), b_n = rewards.dim(1);
  if (discounts.shape() != rewards.shape()) throw DimensionError("gae discounts", discounts.shape(), rewards.shape());
  if (values.rank() != 2 || values.dim(0) != t_n + 1 || values.dim(1) != b_n)
    throw DimensionError("gae values", values.shape(), {t_n + 1, b_n});
  Tensor adv({t_n, b_n});
  for (std::size_t b = 0; b < b_n; ++b) {
    double next = 0.0;
    for (std::size_t t = t_n; t-- > 0;) {
      const double d = discounts(t, b);
      const double delta = rewards(t, b) + d * values(t + 1, b) - values(t, b);
      next = delta + d * lambda * next;
      adv(t, b) = next;
    }
  }
  return adv;
}

Var categorical_entropy(const Var& log_probs) { return -num::row_sum(num::exp(log_probs) * log_probs); }

Var clipped_surrogate(const Var& ratio, const Tensor& advantages, double clip) {
  const Var a = ratio.tape().constant(advantages.reshaped(ratio.shape()));
  return num::minimum(ratio * a, num::clamp(ratio, 1.0 - clip, 1.0 + clip) * a);
}

LossResult ppo_loss(const Model& model, const PpoConfig& ppo, const LossConfig& cfg, const Rollout& ro,
                    PrecisionCache* cache, bool with_grad) {
  cfg.validate();
  const std::size_t t_n = ro.horizon, b_n = ro.batch;
  Tensor adv = gae(ro.rewards, ro.discounts, ro.values, ppo.gae_lambda);
  Tensor targets = adv;
  for (std::size_t t = 0; t < t_n; ++t)
    for (std::size_t b = 0; b < b_n; ++b) targets(t, b) += ro.values(t, b);
  if (ppo.standardize_advantages) {
    const double mean = adv.vec().mean();
    const double sd = std::sqrt((adv.vec().array() - mean).square().mean());
    adv.vec() = (adv.vec().array() - mean) / (sd + 1e-8);
  }

  num::Tape tape(with_grad);
  Recurrence rec(model, tape, b_n, cache);
  std::mt19937_64 latent_rng(ro.latent_seed);
  const bool with_kl = model.posterior().family != Family::Dirac && cfg.beta > 0.0;
  Var surrogate, value, entropy, kl;
  auto acc = [](Var& total, const Var& v) { total = total.valid() ? total + v : v; };
  for (std::size_t t = 0; t < t_n; ++t) {
    const auto agg = rec.predictive(rec.embed_state(ro.observations[t]), ro.n_z, latent_rng, ro.latent_mean);
    const Var logsm = num::log_softmax(agg.logits);
    const Var lp = num::pick(logsm, ro.actions[t]);
    const Var ratio = num::exp(lp - tape.constant(time_row(ro.log_probs, t)));
    acc(surrogate, num::sum(clipped_surrogate(ratio, time_row(adv, t), ppo.clip)));
    acc(value, num::sum(num::square(agg.value - tape.constant(time_row(targets, t)))));
    acc(entropy, num::sum(categorical_entropy(logsm)));
    rec.advance(ro.observations[t + 1], ro.actions[t], column(time_row(ro.rewards, t)));
    if (with_kl) acc(kl, num::sum(rec.kl_to_previous()));
  }
  const double inv_n = 1.0 / static_cast<double>(t_n * b_n);
  Var data = (-ppo.policy_scale * inv_n) * surrogate + (0.5 * ppo.value_scale * inv_n) * value -
             (ppo.entropy_scale * inv_n) * entropy;
  Var loss = with_kl ? data + (cfg.beta * inv_n) * kl : data;

  LossResult res;
  res.loss = loss.value().item();
  res.data_term = data.value().item();
  res.kl = with_kl ? kl.value().item() * inv_n : 0.0;
  if (with_grad) res.grads = tape.grad(loss, rec.params());
  return res;
}

}  // namespace lvrnn::train
