#include "lvrnn/train/regime.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

namespace lvrnn::train {

using model::ConfigError;
using model::Family;
using model::Model;

namespace {

std::uint64_t phase_seed(std::uint64_t seed, std::size_t step, Phase phase) {
  return envs::stream_seed(seed, step, static_cast<std::uint64_t>(phase));
}

void apply(UpdateStats& s, AdamW& opt, model::ParamSet& params, const LossResult& res) {
  s.loss = res.loss;
  s.data_term = res.data_term;
  s.kl = res.kl;
  if (!std::isfinite(res.loss)) {
    spdlog::warn("update {}: non-finite loss (data {}, kl {}), update skipped", s.step, res.data_term, res.kl);
    s.applied = false;
    s.grad_norm = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const auto r = opt.step(params, res.grads);
  s.applied = r.applied;
  s.grad_norm = r.grad_norm;
  if (!r.applied) spdlog::warn("update {}: non-finite gradient, update skipped (loss {})", s.step, res.loss);
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Full: return "full";
    case Regime::Finetune: return "finetune";
    case Regime::Posthoc: return "posthoc";
  }
  return "?";
}

Regime regime_from_string(const std::string& s) {
  if (s == "full") return Regime::Full;
  if (s == "finetune") return Regime::Finetune;
  if (s == "posthoc") return Regime::Posthoc;
  throw ConfigError("regime", "unknown regime '" + s + "' (expected full, finetune or posthoc)");
}

model::Architecture default_architecture(envs::Domain d) {
  model::Architecture a;
  a.observation_dim = envs::observation_dim(d);
  a.num_actions = envs::num_actions(d);
  a.head = d == envs::Domain::Fourier ? model::HeadKind::Regression : model::HeadKind::Policy;
  // Bandit arms have no state beyond the last reward.
  a.policy_uses_state = d != envs::Domain::Bandit;
  a.embed_hidden = {32};
  a.lstm_hidden = 32;
  a.latent_dim = 8;
  a.head_hidden = {32};
  return a;
}

TrainConfig desk_config(envs::Domain d, model::PosteriorConfig posterior) {
  TrainConfig c;
  c.domain = d;
  c.architecture = default_architecture(d);
  c.posterior = std::move(posterior);
  c.schedule.batch = 64;
  switch (d) {
    case envs::Domain::Fourier: c.schedule.updates = 2000; break;
    case envs::Domain::Bandit: c.schedule.updates = 800; break;
    case envs::Domain::Grid: c.schedule.updates = 500; break;
  }
  c.optimizer.learning_rate = 3e-3;
  return c;
}

void TrainConfig::validate() const {
  architecture.validate();
  posterior.validate();
  loss.validate();
  if (architecture.observation_dim != envs::observation_dim(domain))
    throw ConfigError("architecture.observation_dim", "must be " + std::to_string(envs::observation_dim(domain)) +
                                                          " for domain " + envs::to_string(domain));
  if (architecture.num_actions != envs::num_actions(domain))
    throw ConfigError("architecture.num_actions",
                      "must be " + std::to_string(envs::num_actions(domain)) + " for domain " + envs::to_string(domain));
  const bool regression = domain == envs::Domain::Fourier;
  if ((architecture.head == model::HeadKind::Regression) != regression)
    throw ConfigError("architecture.head", "does not match domain " + envs::to_string(domain));
  if (schedule.batch < 1) throw ConfigError("schedule.batch", "must be >= 1");
  if (horizon() < 1) throw ConfigError("schedule.horizon", "must be >= 1");
  for (double f : schedule.snapshot_fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("schedule.snapshot_fractions", "entries must lie in (0, 1]");
  if (!(ppo.gae_lambda >= 0.0 && ppo.gae_lambda <= 1.0)) throw ConfigError("ppo.gae_lambda", "must lie in [0, 1]");
  if (!(ppo.clip > 0.0)) throw ConfigError("ppo.clip", "must be > 0");
  if (ppo.epochs < 1) throw ConfigError("ppo.epochs", "must be >= 1");
  if (!(optimizer.learning_rate > 0.0)) throw ConfigError("optimizer.learning_rate", "must be > 0");
  if (!(optimizer.weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay", "must be >= 0");
}

model::Snapshot to_snapshot(const Model& m) { return {m.architecture(), m.posterior(), m.params()}; }

UpdateStats train_step(model::ParamSet& params, const model::Architecture& arch, const TrainConfig& cfg, AdamW& opt,
                       std::uint64_t seed, std::size_t step) {
  UpdateStats s;
  s.step = step;
  envs::Rng task_rng(phase_seed(seed, step, Phase::Tasks));
  const std::size_t horizon = cfg.horizon();

  if (cfg.domain == envs::Domain::Fourier) {
    std::vector<envs::FourierDataset> data;
    for (std::size_t b = 0; b < cfg.schedule.batch; ++b)
      data.push_back(envs::fourier_dataset(envs::sample_fourier(task_rng), horizon, task_rng));
    const Model m(arch, cfg.posterior, params);
    const LossResult res =
        supervised_elbo(m, cfg.loss, make_regression_batch(data), phase_seed(seed, step, Phase::Latents));
    s.performance = res.data_term;
    apply(s, opt, params, res);
    return s;
  }

  std::vector<envs::Task> tasks;
  for (std::size_t b = 0; b < cfg.schedule.batch; ++b)
    tasks.push_back(envs::sample_task(cfg.domain, task_rng, envs::Split::Train));
  RolloutOptions opts;
  opts.n_z = cfg.loss.n_z;
  const Rollout ro = collect_rollout(Model(arch, cfg.posterior, params), cfg.domain, tasks, horizon,
                                     phase_seed(seed, step, Phase::Environment),
                                     phase_seed(seed, step, Phase::Latents), opts);
  const auto returns = ro.returns();
  s.performance = std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
  for (std::size_t epoch = 0; epoch < cfg.ppo.epochs; ++epoch) {
    const LossResult res = ppo_loss(Model(arch, cfg.posterior, params), cfg.ppo, cfg.loss, ro);
    apply(s, opt, params, res);
  }
  return s;
}

RegimeResult run_regime(Regime regime, const TrainConfig& cfg, std::uint64_t seed,
                        const std::optional<std::filesystem::path>& snapshot, const UpdateCallback& on_update) {
  cfg.validate();
  if (cfg.posterior.family == Family::Dirac && cfg.loss.beta > 0.0)
    spdlog::info("Dirac posterior: KL penalty (beta = {}) is undefined for a point mass and skipped", cfg.loss.beta);

  auto load = [&]() -> Model {
    if (!snapshot) throw model::SnapshotError(to_string(regime) + " regime requires a snapshot");
    if (!std::filesystem::exists(*snapshot)) throw model::SnapshotError("snapshot not found: " + snapshot->string());
    return model::load_as(*snapshot, cfg.architecture, cfg.posterior, phase_seed(seed, 0, Phase::Head));
  };

  RegimeResult out;
  if (regime == Regime::Posthoc) {
    if (cfg.posterior.family == Family::VRNN)
      throw ConfigError("posterior.family", "a VRNN posterior needs a trained head; use finetune instead of posthoc");
    out.final_model = to_snapshot(load());
    return out;
  }

  const Model init = regime == Regime::Full
                         ? Model(cfg.architecture, cfg.posterior, phase_seed(seed, 0, Phase::Init))
                         : load();
  model::ParamSet params = init.params();
  AdamW opt(cfg.optimizer);

  std::set<std::size_t> keep;
  for (double f : cfg.schedule.snapshot_fractions)
    keep.insert(static_cast<std::size_t>(std::llround(f * static_cast<double>(cfg.schedule.updates))));

  for (std::size_t step = 1; step <= cfg.schedule.updates; ++step) {
    UpdateStats s = train_step(params, cfg.architecture, cfg, opt, seed, step);
    if (!s.applied) ++out.skipped_updates;
    out.history.push_back(s);
    if (on_update) on_update(s);
    if (keep.count(step)) out.snapshots.push_back({step, {cfg.architecture, cfg.posterior, params}});
  }
  out.optimizer_steps = opt.steps();
  out.final_model = {cfg.architecture, cfg.posterior, std::move(params)};
  return out;
}

}  // namespace lvrnn::train
