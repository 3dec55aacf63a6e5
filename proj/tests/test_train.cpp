#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "gradcheck.hpp"
#include "lvrnn/train/optim.hpp"
#include "lvrnn/train/regime.hpp"
#include "train_fixtures.hpp"

using namespace lvrnn;
using namespace lvrnn::model;
using namespace lvrnn::train;
using lvrnn::testing::model_gradcheck;
using lvrnn::testing::random_tensor;

namespace {

Architecture toy_arch(envs::Domain d) {
  Architecture a;
  a.observation_dim = envs::observation_dim(d);
  a.num_actions = envs::num_actions(d);
  a.head = d == envs::Domain::Fourier ? HeadKind::Regression : HeadKind::Policy;
  a.policy_uses_state = d != envs::Domain::Bandit;
  a.embed_hidden = {6};
  a.lstm_hidden = 8;
  a.latent_dim = 4;
  a.head_hidden = {6};
  return a;
}

PosteriorConfig windowed(std::size_t kh, std::size_t kz) {
  PosteriorConfig p = PosteriorConfig::preset(Family::LaplaceWindowed);
  p.history_window = kh;
  p.latent_window = kz;
  return p;
}

PosteriorConfig summed_markov() {
  PosteriorConfig p = PosteriorConfig::preset(Family::LaplaceMarkov);
  p.accumulate = Accumulate::MeanAndPrecision;
  return p;
}

std::vector<PosteriorConfig> all_families() {
  return {summed_markov(),
          PosteriorConfig::preset(Family::Dirac),
          PosteriorConfig::preset(Family::VRNN),
          PosteriorConfig::preset(Family::VRNN, CovarianceKind::Diagonal),
          PosteriorConfig::preset(Family::LaplaceStationary),
          PosteriorConfig::preset(Family::LaplaceMarkov),
          PosteriorConfig::preset(Family::LaplaceMarkov, CovarianceKind::Diagonal),
          windowed(3, 1),
          windowed(2, 0)};
}

RegressionBatch fourier_batch(std::size_t b, std::size_t t, std::uint64_t seed) {
  envs::Rng rng(seed);
  std::vector<envs::FourierDataset> data;
  for (std::size_t i = 0; i < b; ++i) data.push_back(envs::fourier_dataset(envs::sample_fourier(rng), t, rng));
  return make_regression_batch(data);
}

std::vector<envs::Task> tasks(envs::Domain d, std::size_t b, std::uint64_t seed) {
  envs::Rng rng(seed);
  std::vector<envs::Task> out;
  for (std::size_t i = 0; i < b; ++i) out.push_back(envs::sample_task(d, rng, envs::Split::Train));
  return out;
}

ParamSet toy_params(std::mt19937_64& rng) {
  ParamSet p;
  p.names = {"a", "b"};
  p.values = {random_tensor({3, 2}, rng), random_tensor({4}, rng)};
  return p;
}

}  // namespace

// ---------------------------------------------------------------- optimizer

TEST(Optim, ZeroGradientIsPureWeightDecay) {
  std::mt19937_64 rng(1);
  ParamSet p = toy_params(rng);
  const ParamSet before = p;
  OptimizerConfig cfg;
  cfg.weight_decay = 0.1;
  AdamW opt(cfg);
  ASSERT_TRUE(opt.step(p, {Tensor({3, 2}), Tensor({4})}).applied);
  for (std::size_t k = 0; k < p.size(); ++k)
    for (std::size_t i = 0; i < p.values[k].size(); ++i)
      EXPECT_NEAR(p.values[k][i], before.values[k][i] * (1.0 - cfg.learning_rate * cfg.weight_decay), 1e-15);
}

TEST(Optim, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr·g/(|g| + ε) per element.
  std::mt19937_64 rng(2);
  ParamSet p = toy_params(rng);
  const ParamSet before = p;
  OptimizerConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.max_global_norm = 1e9;
  AdamW opt(cfg);
  std::vector<Tensor> g = {random_tensor({3, 2}, rng, -0.5, 0.5), random_tensor({4}, rng, -0.5, 0.5)};
  opt.step(p, g);
  for (std::size_t k = 0; k < p.size(); ++k)
    for (std::size_t i = 0; i < p.values[k].size(); ++i) {
      const double gi = g[k][i];
      EXPECT_NEAR(p.values[k][i], before.values[k][i] - cfg.learning_rate * gi / (std::abs(gi) + cfg.epsilon), 1e-12);
    }
}

TEST(Optim, GlobalNormClip) {
  std::vector<Tensor> g = {Tensor({2}, {6.0, 0.0}), Tensor({1}, {8.0})};
  EXPECT_DOUBLE_EQ(clip_gradients(g, 1.0, 5.0), 10.0);
  EXPECT_NEAR(g[0][0], 0.6, 1e-15);
  EXPECT_NEAR(g[1][0], 0.8, 1e-15);

  std::vector<Tensor> small = {Tensor({2}, {0.3, -0.4})};
  EXPECT_DOUBLE_EQ(clip_gradients(small, 1.0, 5.0), 0.5);
  EXPECT_EQ(small[0], Tensor({2}, {0.3, -0.4}));

  std::vector<Tensor> elem = {Tensor({2}, {7.0, -9.0})};
  clip_gradients(elem, 1e9, 5.0);
  EXPECT_EQ(elem[0], Tensor({2}, {5.0, -5.0}));
}

TEST(Optim, NonFiniteGradientSkipsUpdate) {
  std::mt19937_64 rng(3);
  ParamSet p = toy_params(rng);
  const ParamSet before = p;
  AdamW opt;
  Tensor bad({4});
  bad[2] = std::numeric_limits<double>::quiet_NaN();
  const auto r = opt.step(p, {Tensor({3, 2}), bad});
  EXPECT_FALSE(r.applied);
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.skipped(), 1u);
  EXPECT_EQ(opt.steps(), 0u);
  EXPECT_TRUE(opt.first_moments().empty());
  EXPECT_THROW(opt.step(p, {Tensor({3, 2})}), num::DimensionError);
}

TEST(Optim, Deterministic) {
  std::mt19937_64 rng(4);
  ParamSet a = toy_params(rng), b = a;
  AdamW oa, ob;
  std::mt19937_64 ga(5), gb(5);
  for (int i = 0; i < 20; ++i) {
    oa.step(a, {random_tensor({3, 2}, ga), random_tensor({4}, ga)});
    ob.step(b, {random_tensor({3, 2}, gb), random_tensor({4}, gb)});
  }
  EXPECT_EQ(a, b);
}

// ---------------------------------------------------------------- PPO pieces

TEST(Gae, OneStep) {
  const Tensor adv = gae(Tensor({1, 1}, {1.0}), Tensor({1, 1}, {0.9}), Tensor({2, 1}, {0.5, 0.0}), 0.9);
  EXPECT_DOUBLE_EQ(adv(0, 0), 0.5);
}

TEST(Gae, MatchesForwardSum) {
  // A_t = Σ_l (Π_{j<l} d_{t+j} λ) δ_{t+l}, evaluated forwards.
  std::mt19937_64 rng(6);
  const std::size_t t_n = 12, b_n = 3;
  const double lambda = 0.9;
  Tensor r = random_tensor({t_n, b_n}, rng), v = random_tensor({t_n + 1, b_n}, rng), d({t_n, b_n});
  for (std::size_t t = 0; t < t_n; ++t)
    for (std::size_t b = 0; b < b_n; ++b) d(t, b) = (t + b) % 5 == 4 ? 0.0 : 0.9;
  const Tensor adv = gae(r, d, v, lambda);
  for (std::size_t b = 0; b < b_n; ++b)
    for (std::size_t t = 0; t < t_n; ++t) {
      double acc = 0.0, w = 1.0;
      for (std::size_t l = t; l < t_n; ++l) {
        acc += w * (r(l, b) + d(l, b) * v(l + 1, b) - v(l, b));
        w *= d(l, b) * lambda;
      }
      EXPECT_NEAR(adv(t, b), acc, 1e-12);
    }
}

TEST(Gae, BoundaryTruncates) {
  const Tensor r({3, 1}, {0.0, 5.0, 7.0});
  const Tensor v({4, 1}, {0.1, 0.2, 0.3, 0.4});
  const Tensor adv = gae(r, Tensor({3, 1}, {0.0, 0.9, 0.9}), v, 0.9);
  EXPECT_DOUBLE_EQ(adv(0, 0), -0.1);
  EXPECT_THROW(gae(r, Tensor({2, 1}), v, 0.9), num::DimensionError);
}

TEST(Ppo, ClippedSurrogate) {
  num::Tape tape(false);
  const Var ratio = tape.constant(Tensor({4}, {1.5, 1.5, 0.5, 0.5}));
  const Tensor s = clipped_surrogate(ratio, Tensor({4}, {1.0, -1.0, 1.0, -1.0}), 0.2).value();
  EXPECT_NEAR(s[0], 1.2, 1e-15);
  EXPECT_NEAR(s[1], -1.5, 1e-15);
  EXPECT_NEAR(s[2], 0.5, 1e-15);
  EXPECT_NEAR(s[3], -0.8, 1e-15);
}

TEST(Ppo, UniformEntropy) {
  num::Tape tape(false);
  const Var lp = num::log_softmax(tape.constant(Tensor({2, 5})));
  const Tensor h = categorical_entropy(lp).value();
  EXPECT_NEAR(h[0], std::log(5.0), 1e-14);
  EXPECT_NEAR(h[1], std::log(5.0), 1e-14);
  const Var peaked = num::log_softmax(tape.constant(Tensor({1, 3}, {0.0, 800.0, 0.0})));
  EXPECT_NEAR(categorical_entropy(peaked).value()[0], 0.0, 1e-14);
}

TEST(Ppo, FirstEpochLossFromAdvantages) {
  // The replay uses the rollout latents, so ρ = 1 and V = V_old, giving
  // −mean(A) + ½ mean(A²) when the entropy bonus is off.
  for (const auto& post : {PosteriorConfig::preset(Family::Dirac), PosteriorConfig::preset(Family::LaplaceMarkov),
                           PosteriorConfig::preset(Family::VRNN)}) {
    const Model m(toy_arch(envs::Domain::Grid), post, 7);
    const Rollout ro = collect_rollout(m, envs::Domain::Grid, tasks(envs::Domain::Grid, 3, 8), 20, 9, 10);
    PpoConfig ppo;
    ppo.entropy_scale = 0.0;
    LossConfig cfg;
    cfg.beta = 0.0;
    const LossResult res = ppo_loss(m, ppo, cfg, ro, nullptr, false);
    const Tensor adv = gae(ro.rewards, ro.discounts, ro.values, ppo.gae_lambda);
    const double expected = -adv.vec().mean() + 0.5 * adv.vec().squaredNorm() / static_cast<double>(adv.size());
    EXPECT_NEAR(res.loss, expected, 1e-12) << to_string(post.family);
  }
}

// ---------------------------------------------------------------- supervised

TEST(Supervised, GaussianNll) {
  num::Tape tape(false);
  const Tensor v = gaussian_nll(tape.constant(Tensor({2}, {0.3, 1.0})), tape.constant(Tensor({2}, {1.0, 4.0})),
                                Tensor({2}, {0.3, 3.0}))
                       .value();
  EXPECT_NEAR(v[0], 0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(v[1], 0.5 * std::log(2.0 * std::numbers::pi * 4.0) + 0.5, 1e-15);
}

TEST(Supervised, BatchLayoutAndErrors) {
  envs::Rng rng(11);
  std::vector<envs::FourierDataset> d = {envs::fourier_dataset(envs::sample_fourier(rng), 5, rng),
                                         envs::fourier_dataset(envs::sample_fourier(rng), 5, rng)};
  const RegressionBatch b = make_regression_batch(d);
  EXPECT_EQ(b.horizon(), 5u);
  EXPECT_EQ(b.batch(), 2u);
  EXPECT_EQ(b.y(3, 1), d[1].y[3]);
  d[1].x.pop_back();
  EXPECT_THROW(make_regression_batch(d), num::DimensionError);
  EXPECT_THROW(make_regression_batch({}), num::ContractError);
}

TEST(Supervised, DiracHasNoKl) {
  const Model m(toy_arch(envs::Domain::Fourier), PosteriorConfig::preset(Family::Dirac), 12);
  const LossResult r = supervised_elbo(m, LossConfig{}, fourier_batch(2, 6, 13), 14, nullptr, false);
  EXPECT_EQ(r.kl, 0.0);
  EXPECT_DOUBLE_EQ(r.loss, r.data_term);
}

TEST(Supervised, KlWeightedByBeta) {
  const Model m(toy_arch(envs::Domain::Fourier), PosteriorConfig::preset(Family::LaplaceMarkov), 15);
  const RegressionBatch batch = fourier_batch(2, 6, 16);
  LossConfig cfg;
  cfg.beta = 0.5;
  const LossResult r = supervised_elbo(m, cfg, batch, 17, nullptr, false);
  EXPECT_GT(r.kl, 0.0);
  EXPECT_NEAR(r.loss, r.data_term + 0.5 * r.kl, 1e-12);
  cfg.beta = -1.0;
  EXPECT_THROW(supervised_elbo(m, cfg, batch, 17, nullptr, false), ConfigError);
}

TEST(Supervised, GradientMatchesFiniteDifferences) {
  const RegressionBatch batch = fourier_batch(2, 5, 18);
  LossConfig cfg;
  cfg.beta = 0.1;
  cfg.n_z = 2;
  for (const auto& post : all_families()) {
    const Model m(toy_arch(envs::Domain::Fourier), post, 19);
    const auto check = model_gradcheck(
        m, [&](const Model& mm, PrecisionCache* c, bool g) { return supervised_elbo(mm, cfg, batch, 20, c, g); }, 6,
        21);
    EXPECT_LT(check.relative_error, 1e-3) << to_string(post.family) << " k_H=" << post.history_window;
  }
}

// ---------------------------------------------------------------- reinforcement learning

TEST(Rollout, ShapesAndDeterminism) {
  const Model m(toy_arch(envs::Domain::Bandit), PosteriorConfig::preset(Family::LaplaceMarkov), 22);
  const auto ts = tasks(envs::Domain::Bandit, 4, 23);
  RolloutOptions opt;
  opt.record_posterior = true;
  const Rollout a = collect_rollout(m, envs::Domain::Bandit, ts, 10, 24, 25, opt);
  const Rollout b = collect_rollout(m, envs::Domain::Bandit, ts, 10, 24, 25, opt);
  EXPECT_EQ(a.observations.size(), 11u);
  EXPECT_EQ(a.actions.size(), 10u);
  EXPECT_EQ(a.values.dim(0), 11u);
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_EQ(a.rewards, b.rewards);
  EXPECT_EQ(a.log_probs, b.log_probs);
  EXPECT_EQ(a.entropy, b.entropy);
  for (double lp : a.log_probs.data()) EXPECT_LE(lp, 0.0);
  for (double kl : a.consecutive_kl.data()) EXPECT_GE(kl, -1e-9);
  // Precision only grows, so the entropy never rises.
  for (std::size_t t = 1; t < 10; ++t)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_LE(a.entropy(t, j), a.entropy(t - 1, j) + 1e-9);
  EXPECT_THROW(collect_rollout(m, envs::Domain::Fourier, tasks(envs::Domain::Fourier, 1, 1), 5, 1, 1),
               num::ContractError);
  EXPECT_THROW(collect_rollout(m, envs::Domain::Grid, tasks(envs::Domain::Grid, 1, 1), 5, 1, 1), num::DimensionError);
}

TEST(Rollout, GreedyUsesArgmax) {
  const Model m(toy_arch(envs::Domain::Bandit), PosteriorConfig::preset(Family::Dirac), 26);
  RolloutOptions opt;
  opt.greedy = true;
  const auto ts = tasks(envs::Domain::Bandit, 2, 27);
  const Rollout a = collect_rollout(m, envs::Domain::Bandit, ts, 6, 28, 29, opt);
  const Rollout b = collect_rollout(m, envs::Domain::Bandit, ts, 6, 99, 29, opt);
  // The first decision sees no environment randomness.
  EXPECT_EQ(a.actions[0], b.actions[0]);
  std::mt19937_64 rng(0);
  const PredictiveOutput p = posterior_predictive(m, initial_state(m).phi, envs::bandit_initial_observation(), 1, rng);
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.logits.size(); ++i)
    if (p.logits[i] > p.logits[best]) best = i;
  EXPECT_EQ(a.actions[0][0], best);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_LE(-a.log_probs(t, j), std::log(5.0) + 1e-12);
}

TEST(Ppo, GradientMatchesFiniteDifferences) {
  LossConfig cfg;
  cfg.beta = 0.1;
  PpoConfig ppo;
  for (envs::Domain d : {envs::Domain::Bandit, envs::Domain::Grid}) {
    for (const auto& post : all_families()) {
      const Model m(toy_arch(d), post, 30);
      const Rollout ro = collect_rollout(m, d, tasks(d, 2, 31), 8, 32, 33);
      const auto check = model_gradcheck(
          m, [&](const Model& mm, PrecisionCache* c, bool g) { return ppo_loss(mm, ppo, cfg, ro, c, g); }, 5, 34);
      EXPECT_LT(check.relative_error, 1e-3) << envs::to_string(d) << " " << to_string(post.family);
    }
  }
}

// ---------------------------------------------------------------- regimes

namespace {

std::filesystem::path temp_snapshot(const std::string& name, const Snapshot& s) {
  const auto path = std::filesystem::temp_directory_path() / ("lvrnn_test_" + name + ".snap");
  save_snapshot(Model(s.architecture, s.posterior, s.params), path);
  return path;
}

TrainConfig tiny_config(envs::Domain d, PosteriorConfig post) {
  TrainConfig c = desk_config(d, std::move(post));
  c.architecture = toy_arch(d);
  c.schedule.batch = 4;
  c.schedule.updates = 8;
  c.schedule.horizon = 10;
  return c;
}

}  // namespace

TEST(Regime, FullIsDeterministicAndKeepsSnapshots) {
  const TrainConfig c = tiny_config(envs::Domain::Grid, PosteriorConfig::preset(Family::Dirac));
  std::vector<std::size_t> seen;
  const RegimeResult a = run_regime(Regime::Full, c, 3, std::nullopt, [&](const UpdateStats& s) { seen.push_back(s.step); });
  const RegimeResult b = run_regime(Regime::Full, c, 3);
  EXPECT_EQ(seen.size(), 8u);
  EXPECT_EQ(a.optimizer_steps, 8u);
  ASSERT_EQ(a.snapshots.size(), 2u);
  EXPECT_EQ(a.snapshots[0].step, 4u);
  EXPECT_EQ(a.snapshots[1].step, 6u);
  EXPECT_EQ(a.final_model.params, b.final_model.params);
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].loss, b.history[i].loss);
  const RegimeResult other = run_regime(Regime::Full, c, 4);
  EXPECT_FALSE(other.final_model.params == a.final_model.params);
}

TEST(Regime, PosthocPerformsNoUpdates) {
  const TrainConfig dirac = tiny_config(envs::Domain::Bandit, PosteriorConfig::preset(Family::Dirac));
  const RegimeResult trained = run_regime(Regime::Full, dirac, 5);
  const auto path = temp_snapshot("posthoc", trained.final_model);

  TrainConfig post = dirac;
  post.posterior = PosteriorConfig::preset(Family::LaplaceMarkov);
  std::size_t calls = 0;
  const RegimeResult ph = run_regime(Regime::Posthoc, post, 5, path, [&](const UpdateStats&) { ++calls; });
  EXPECT_EQ(ph.optimizer_steps, 0u);
  EXPECT_EQ(calls, 0u);
  EXPECT_TRUE(ph.history.empty());
  EXPECT_EQ(ph.final_model.params, trained.final_model.params);

  // Acting at the belief mean reproduces the Dirac agent exactly.
  RolloutOptions at_mean;
  at_mean.greedy = true;
  at_mean.latent_mean = true;
  const auto ts = tasks(envs::Domain::Bandit, 6, 7);
  const Model base(trained.final_model.architecture, trained.final_model.posterior, trained.final_model.params);
  const Model laplace(ph.final_model.architecture, ph.final_model.posterior, ph.final_model.params);
  const Rollout r0 = collect_rollout(base, envs::Domain::Bandit, ts, 30, 8, 9, at_mean);
  const Rollout r1 = collect_rollout(laplace, envs::Domain::Bandit, ts, 30, 8, 9, at_mean);
  EXPECT_EQ(r0.actions, r1.actions);
  EXPECT_EQ(r0.rewards, r1.rewards);
  EXPECT_EQ(r0.values, r1.values);

  post.posterior = PosteriorConfig::preset(Family::VRNN);
  EXPECT_THROW(run_regime(Regime::Posthoc, post, 5, path), ConfigError);
  std::filesystem::remove(path);
  post.posterior = PosteriorConfig::preset(Family::LaplaceMarkov);
  EXPECT_THROW(run_regime(Regime::Posthoc, post, 5, path), SnapshotError);
  EXPECT_THROW(run_regime(Regime::Finetune, post, 5), SnapshotError);
}

TEST(Regime, FinetuneStartsFromSnapshot) {
  const TrainConfig dirac = tiny_config(envs::Domain::Fourier, PosteriorConfig::preset(Family::Dirac));
  const RegimeResult trained = run_regime(Regime::Full, dirac, 10);
  const auto path = temp_snapshot("finetune", trained.snapshots.front().snapshot);

  TrainConfig ft = dirac;
  ft.posterior = PosteriorConfig::preset(Family::LaplaceMarkov);
  ft.schedule.updates = 0;
  const RegimeResult zero = run_regime(Regime::Finetune, ft, 10, path);
  EXPECT_EQ(zero.final_model.params, trained.snapshots.front().snapshot.params);

  ft.schedule.updates = 3;
  ft.posterior = PosteriorConfig::preset(Family::VRNN);
  const RegimeResult vrnn = run_regime(Regime::Finetune, ft, 10, path);
  EXPECT_EQ(vrnn.optimizer_steps, 3u);
  EXPECT_TRUE(vrnn.final_model.params.contains("posterior_head.w"));
  for (const auto& s : vrnn.history) EXPECT_TRUE(std::isfinite(s.loss));
  std::filesystem::remove(path);
}

TEST(Regime, ConfigValidation) {
  TrainConfig c = desk_config(envs::Domain::Grid, PosteriorConfig::preset(Family::Dirac));
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.horizon(), 100u);
  EXPECT_EQ(desk_config(envs::Domain::Bandit).horizon(), 50u);
  c.architecture.num_actions = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = desk_config(envs::Domain::Fourier);
  c.schedule.batch = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = desk_config(envs::Domain::Fourier);
  c.schedule.snapshot_fractions = {1.5};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(regime_from_string("sideways"), ConfigError);
  EXPECT_EQ(regime_from_string(to_string(Regime::Finetune)), Regime::Finetune);
}

TEST(Regime, DiracBanditImprovesWithin200Updates) {
  TrainConfig c = desk_config(envs::Domain::Bandit, PosteriorConfig::preset(Family::Dirac));
  c.schedule.updates = 200;
  const RegimeResult r = run_regime(Regime::Full, c, 1);
  auto window_mean = [&](std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += r.history[i].performance;
    return s / static_cast<double>(end - begin);
  };
  // Uniform play earns 10 on average over 50 pulls.
  EXPECT_GT(window_mean(180, 200), window_mean(0, 20) + 2.0);
}
