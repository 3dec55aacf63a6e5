#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gradcheck.hpp"
#include "lvrnn/model/snapshot.hpp"
#include "lvrnn/num/linalg.hpp"
#include "oracles.hpp"

using namespace lvrnn;
using namespace lvrnn::model;
using lvrnn::testing::random_tensor;

namespace {

Architecture small_policy_arch() {
  Architecture a;
  a.observation_dim = 3;
  a.num_actions = 2;
  a.head = HeadKind::Policy;
  a.embed_hidden = {5, 4};
  a.lstm_hidden = 6;
  a.latent_dim = 4;
  a.head_hidden = {5, 3};
  return a;
}

Architecture small_regression_arch(std::size_t latent = 4) {
  Architecture a;
  a.observation_dim = 1;
  a.num_actions = 0;
  a.head = HeadKind::Regression;
  a.embed_hidden = {5, 4};
  a.lstm_hidden = 6;
  a.latent_dim = latent;
  a.head_hidden = {5, 3};
  return a;
}

PosteriorConfig markov(Accumulate acc = Accumulate::PrecisionOnly) {
  PosteriorConfig p = PosteriorConfig::preset(Family::LaplaceMarkov);
  p.accumulate = acc;
  return p;
}

std::vector<StepInput> random_inputs(const Architecture& a, std::size_t t, std::mt19937_64& rng) {
  std::vector<StepInput> out;
  std::uniform_int_distribution<std::size_t> act(0, a.num_actions > 0 ? a.num_actions - 1 : 0);
  std::uniform_real_distribution<double> r(-1, 1);
  for (std::size_t i = 0; i < t; ++i) out.push_back({random_tensor({a.observation_dim}, rng), act(rng), r(rng)});
  return out;
}

struct Trace {
  std::vector<Tensor> phi;
  std::vector<Belief> beliefs;
  std::vector<PosteriorState> states;
};

Trace run(const Model& m, const std::vector<StepInput>& inputs) {
  Trace tr;
  PosteriorState s = initial_state(m);
  for (const StepInput& in : inputs) {
    auto [next, b] = step(m, s, in);
    s = std::move(next);
    tr.phi.push_back(s.phi);
    tr.beliefs.push_back(std::move(b));
    tr.states.push_back(s);
  }
  return tr;
}

double rel(const Tensor& a, const Tensor& b) {
  return (a.vec() - b.vec()).norm() / std::max(1e-300, b.vec().norm());
}

}  // namespace

// ---------------------------------------------------------------- lstm_cell

TEST(LstmCell, ZeroWeightsAndCarryGiveZeroHidden) {
  const Tensor w({3, 8}), u({2, 8}), b({8});
  const LstmOutput out = lstm_cell({w, u, b}, Tensor::vector({0.3, -1, 2}), {Tensor({2}), Tensor({2})});
  EXPECT_EQ(out.hidden, Tensor({2}));
  EXPECT_EQ(out.cell, Tensor({2}));
}

TEST(LstmCell, HiddenBoundedAndMatchesReference) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor w = random_tensor({5, 12}, rng, -3, 3), u = random_tensor({4, 12}, rng, -3, 3);
    const Tensor b = random_tensor({12}, rng, -3, 3);
    const Tensor x = random_tensor({5}, rng, -2, 2), r = random_tensor({4}, rng), c = random_tensor({3}, rng, -4, 4);
    const LstmOutput out = lstm_cell({w, u, b}, x, {r, c});
    Tensor h_ref, c_ref;
    lvrnn::testing::ReferenceLstm::step(w, u, b, x, r, c, h_ref, c_ref);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_GT(out.hidden[j], -1.0);
      EXPECT_LT(out.hidden[j], 1.0);
      EXPECT_NEAR(out.hidden[j], h_ref[j], 1e-12);
      EXPECT_NEAR(out.cell[j], c_ref[j], 1e-12);
    }
  }
}

TEST(LstmCell, TapeVersionMatchesSingleStep) {
  std::mt19937_64 rng(5);
  const Tensor w = random_tensor({5, 12}, rng), u = random_tensor({4, 12}, rng), b = random_tensor({12}, rng);
  const Tensor x = random_tensor({2, 5}, rng), r = random_tensor({2, 4}, rng), c = random_tensor({2, 3}, rng);
  num::Tape tape(false);
  const LstmVars v = lstm_cell(tape.constant(w), tape.constant(u), tape.constant(b), tape.constant(x),
                               tape.constant(r), tape.constant(c));
  for (std::size_t row = 0; row < 2; ++row) {
    auto pick = [&](const Tensor& m) {
      Tensor o({m.dim(1)});
      for (std::size_t j = 0; j < m.dim(1); ++j) o[j] = m(row, j);
      return o;
    };
    const LstmOutput out = lstm_cell({w, u, b}, pick(x), {pick(r), pick(c)});
    EXPECT_LT(num::max_abs_diff(out.hidden, pick(v.hidden.value())), 1e-14);
    EXPECT_LT(num::max_abs_diff(out.cell, pick(v.cell.value())), 1e-14);
  }
}

TEST(LstmCell, StateJacobianMatchesDualAndFiniteDifferences) {
  std::mt19937_64 rng(11);
  Architecture a = small_regression_arch(8);
  const Model m(a, PosteriorConfig::preset(Family::Dirac), 17);
  const Tensor x = random_tensor({a.input_dim()}, rng), phi = random_tensor({8}, rng), cell = random_tensor({6}, rng);
  const Tensor jac = state_jacobian(m, x, phi, cell);

  const num::DualStep dual_step = [&](const Tensor& in, const num::DualTensor& s) {
    return lstm_project_dual(m.lstm_weights(), m.param("project.w"), m.param("project.b"), in, s, cell);
  };
  EXPECT_LT(num::max_abs_diff(jac, num::jacobian_wrt_state(dual_step, x, phi)), 1e-12);

  const Tensor fd = lvrnn::testing::fd_jacobian(
      [&](const Tensor& p) { return lvrnn::testing::projected_output(m, x, p, cell); }, phi);
  EXPECT_LT(num::max_abs_diff(jac, fd), 1e-6);

  // Directional derivative against a one-sided-free central difference.
  const Tensor dir = random_tensor({8}, rng);
  const Tensor jv = num::jvp(
      [&](const num::DualTensor& s) { return dual_step(x, s); }, phi, dir);
  const double h = 1e-5;
  Tensor p = phi, q = phi;
  p.vec() += h * dir.vec();
  q.vec() -= h * dir.vec();
  Tensor fd_dir = lvrnn::testing::projected_output(m, x, p, cell);
  fd_dir.vec() -= lvrnn::testing::projected_output(m, x, q, cell).vec();
  fd_dir.vec() /= 2 * h;
  EXPECT_LT(rel(jv, fd_dir), 1e-4);
}

// ---------------------------------------------------------------- step

TEST(Step, DiracPointIsProjectedLstmOutput) {
  std::mt19937_64 rng(1);
  const Architecture a = small_policy_arch();
  const Model m(a, PosteriorConfig::preset(Family::Dirac), 2);
  const auto inputs = random_inputs(a, 4, rng);
  const Trace tr = run(m, inputs);
  // The stationary family keeps the embedded inputs around.
  const Trace lap = run(Model(a, PosteriorConfig::preset(Family::LaplaceStationary), m.params()), inputs);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    EXPECT_EQ(std::get<Tensor>(tr.beliefs[t]), tr.phi[t]);
    const Tensor prev_phi = t ? tr.phi[t - 1] : Tensor({a.latent_dim});
    const Tensor prev_cell = t ? tr.states[t - 1].cell : Tensor({a.lstm_hidden});
    const Tensor expected = lvrnn::testing::projected_output(m, lap.states[t].history.back(), prev_phi, prev_cell);
    EXPECT_LT(num::max_abs_diff(tr.phi[t], expected), 1e-12);
  }
}

TEST(Step, MarkovPrecisionOnlyAtFixedPointSumsIdenticalJacobians) {
  // Zero input weights and biases make (φ, c) = (0, 0) a fixed point, so
  // every step has the same Jacobian J = ¼ Pᵀ U_gᵀ.
  Architecture a = small_policy_arch();
  Model m(a, markov(), 4);
  auto& ps = m.params();
  ps.values[ps.index("lstm.w")] = Tensor(ps.values[ps.index("lstm.w")].shape());
  ps.values[ps.index("lstm.b")] = Tensor(ps.values[ps.index("lstm.b")].shape());
  ps.values[ps.index("project.b")] = Tensor(ps.values[ps.index("project.b")].shape());
  const Tensor& u = m.param("lstm.u");
  const Tensor& p = m.param("project.w");
  const std::size_t h = a.lstm_hidden, n = a.latent_dim;
  num::RowMatrix j = 0.25 * p.mat().transpose() * u.mat().middleCols(2 * h, h).transpose();
  ASSERT_EQ(j.rows(), static_cast<Eigen::Index>(n));

  std::mt19937_64 rng(2);
  const Trace tr = run(m, random_inputs(a, 2, rng));
  const auto& q2 = std::get<GaussianBelief>(tr.beliefs[1]);
  num::RowMatrix expected = 2.0 * j.transpose() * j;
  expected.diagonal().array() += 2 * belief::kLaplaceJitter;
  EXPECT_LT((q2.precision.values().mat() - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(q2.mean, tr.phi[1]);
}

TEST(Step, StationaryEqualsRecomputeFromScratch) {
  std::mt19937_64 rng(8);
  const Architecture a = small_policy_arch();
  const Model m(a, PosteriorConfig::preset(Family::LaplaceStationary), 6);
  const auto inputs = random_inputs(a, 7, rng);
  const Trace tr = run(m, inputs);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const PosteriorState& s = tr.states[t];
    ASSERT_EQ(s.history.size(), t + 1);
    std::vector<Tensor> js;
    for (const Tensor& x : s.history)
      js.push_back(lvrnn::testing::fd_jacobian([&](const Tensor& p) { return lvrnn::testing::projected_output(m, x, p, s.cell); },
                                               s.phi));
    const auto oracle = belief::laplace_precision(js, a.latent_dim, CovarianceKind::Full);
    const auto& q = std::get<GaussianBelief>(tr.beliefs[t]);
    EXPECT_LT(num::max_abs_diff(q.precision.values(), oracle.values()), 1e-7) << "t=" << t;
  }
}

TEST(Step, WindowCoveringHistoryEqualsStationary) {
  std::mt19937_64 rng(9);
  const Architecture a = small_policy_arch();
  const auto inputs = random_inputs(a, 6, rng);
  PosteriorConfig windowed = PosteriorConfig::preset(Family::LaplaceWindowed);
  windowed.history_window = 6;
  const Trace w = run(Model(a, windowed, 3), inputs);
  const Trace s = run(Model(a, PosteriorConfig::preset(Family::LaplaceStationary), 3), inputs);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto& qw = std::get<GaussianBelief>(w.beliefs[t]);
    const auto& qs = std::get<GaussianBelief>(s.beliefs[t]);
    EXPECT_EQ(qw.precision, qs.precision);
    EXPECT_EQ(qw.mean, qs.mean);
  }
  // A shorter window drops old inputs.
  windowed.history_window = 2;
  const Trace w2 = run(Model(a, windowed, 3), inputs);
  EXPECT_EQ(w2.states.back().history.size(), 2u);
}

TEST(Step, MeanTrajectoryInvariantAcrossFamilies) {
  std::mt19937_64 rng(10);
  const Architecture a = small_policy_arch();
  const Model dirac(a, PosteriorConfig::preset(Family::Dirac), 12);
  const ParamSet& ps = dirac.params();
  for (int trial = 0; trial < 5; ++trial) {
    const auto inputs = random_inputs(a, 12, rng);
    const Trace d = run(dirac, inputs);
    for (const PosteriorConfig& cfg : {PosteriorConfig::preset(Family::LaplaceStationary), markov(),
                                       PosteriorConfig::preset(Family::LaplaceMarkov, CovarianceKind::Diagonal)}) {
      const Trace l = run(Model(a, cfg, ps), inputs);
      for (std::size_t t = 0; t < inputs.size(); ++t) {
        EXPECT_EQ(l.phi[t], d.phi[t]);
        EXPECT_EQ(std::get<GaussianBelief>(l.beliefs[t]).mean, d.phi[t]);
      }
    }
  }
}

TEST(Step, PrecisionOnlyAccumulationIsMonotone) {
  std::mt19937_64 rng(13);
  const Architecture a = small_policy_arch();
  const Model m(a, markov(), 5);
  const Trace tr = run(m, random_inputs(a, 20, rng));
  for (std::size_t t = 1; t < tr.beliefs.size(); ++t) {
    const auto& prev = std::get<GaussianBelief>(tr.beliefs[t - 1]);
    const auto& cur = std::get<GaussianBelief>(tr.beliefs[t]);
    const Tensor delta = num::sub(cur.precision.values(), prev.precision.values());
    Eigen::SelfAdjointEigenSolver<num::RowMatrix> es(delta.mat());
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
    EXPECT_LE(belief::entropy(cur), belief::entropy(prev) + 1e-12);
  }
}

TEST(Step, MeanAndPrecisionSumsMeans) {
  std::mt19937_64 rng(14);
  const Architecture a = small_policy_arch();
  const Model m(a, markov(Accumulate::MeanAndPrecision), 5);
  const Trace tr = run(m, random_inputs(a, 5, rng));
  Tensor sum({a.latent_dim});
  for (std::size_t t = 0; t < 5; ++t) {
    sum.vec() += tr.phi[t].vec();
    EXPECT_LT(num::max_abs_diff(std::get<GaussianBelief>(tr.beliefs[t]).mean, sum), 1e-14);
  }
}

TEST(Step, ConfigContradictionsRejected) {
  PosteriorConfig p = PosteriorConfig::preset(Family::Dirac);
  p.covariance = CovarianceKind::Full;
  EXPECT_THROW(Model(small_policy_arch(), p, 1), ConfigError);
  PosteriorConfig q = markov();
  q.history_window = 3;
  EXPECT_THROW(Model(small_policy_arch(), q, 1), ConfigError);
  PosteriorConfig s = PosteriorConfig::preset(Family::LaplaceStationary);
  s.latent_window = 1;
  EXPECT_THROW(Model(small_policy_arch(), s, 1), ConfigError);
}

// ---------------------------------------------------------------- Hessian oracle

TEST(Laplace, PrecisionEqualsNegativeHessianOfLogPosterior) {
  std::mt19937_64 rng(21);
  for (std::size_t n : {2u, 5u, 8u}) {
    Architecture a = small_regression_arch(n);
    const Model m(a, PosteriorConfig::preset(Family::LaplaceStationary), 30 + n);
    const Trace tr = run(m, random_inputs(a, 6, rng));
    const PosteriorState& s = tr.states.back();
    const std::vector<Tensor> xs(s.history.begin(), s.history.end());
    const Tensor hess = lvrnn::testing::neg_hessian_log_posterior(m, xs, s.phi, s.cell);
    Tensor lam = std::get<GaussianBelief>(tr.beliefs.back()).precision.values();
    for (std::size_t i = 0; i < n; ++i) lam(i, i) -= belief::kLaplaceJitter;
    EXPECT_LT(rel(hess, lam), 1e-4) << "n=" << n;
  }
}

// ---------------------------------------------------------------- batched unroll

TEST(Recurrence, BatchMatchesPerTrajectorySteps) {
  std::mt19937_64 rng(31);
  const Architecture a = small_policy_arch();
  const Model m(a, markov(), 8);
  const std::size_t batch = 3, horizon = 5;
  std::vector<std::vector<StepInput>> inputs;
  for (std::size_t b = 0; b < batch; ++b) inputs.push_back(random_inputs(a, horizon, rng));
  num::Tape tape(false);
  Recurrence r(m, tape, batch);
  for (std::size_t t = 0; t < horizon; ++t) {
    Tensor obs({batch, a.observation_dim}), rew({batch, 1});
    std::vector<std::size_t> act;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t k = 0; k < a.observation_dim; ++k) obs(b, k) = inputs[b][t].observation[k];
      rew(b, 0) = inputs[b][t].reward;
      act.push_back(inputs[b][t].action);
    }
    r.advance(obs, act, rew);
  }
  for (std::size_t b = 0; b < batch; ++b) {
    const Trace tr = run(m, inputs[b]);
    const auto g = r.gaussians()[b];
    EXPECT_EQ(r.state(b).phi, tr.phi.back());
    EXPECT_EQ(g.precision, std::get<GaussianBelief>(tr.beliefs.back()).precision);
  }
}

TEST(Recurrence, ConsecutiveKlMatchesClosedForm) {
  std::mt19937_64 rng(32);
  for (Family fam : {Family::LaplaceMarkov, Family::LaplaceStationary, Family::VRNN}) {
    for (CovarianceKind kind : {CovarianceKind::Full, CovarianceKind::Diagonal}) {
      const Architecture a = small_policy_arch();
      const Model m(a, PosteriorConfig::preset(fam, kind), 40);
      num::Tape tape(false);
      Recurrence r(m, tape, 2);
      for (int t = 0; t < 4; ++t) {
        const auto before = r.gaussians();
        const std::size_t act[] = {0, 1};
        r.advance(random_tensor({2, 3}, rng), act, random_tensor({2, 1}, rng));
        const auto after = r.gaussians();
        const Tensor kl = r.kl_to_previous().value();
        for (std::size_t b = 0; b < 2; ++b) {
          const double ref = belief::kl(after[b], before[b]);
          EXPECT_NEAR(kl[b], ref, 1e-8 * std::max(1.0, std::abs(ref)))
              << to_string(fam) << " " << belief::to_string(kind) << " t=" << t;
        }
      }
    }
  }
}

TEST(Recurrence, VrnnSamplesMatchBeliefMoments) {
  const Architecture a = small_policy_arch();
  const Model m(a, PosteriorConfig::preset(Family::VRNN, CovarianceKind::Full), 41);
  num::Tape tape(false);
  Recurrence r(m, tape, 1);
  const std::size_t act[] = {1};
  std::mt19937_64 rng(4);
  r.advance(random_tensor({1, 3}, rng), act, Tensor({1, 1}, {0.5}));
  const GaussianBelief q = r.gaussians()[0];
  const Tensor cov = belief::covariance(q);
  const int draws = 40000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  num::RowMatrix second = num::RowMatrix::Zero(4, 4);
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd z = r.sample_latents(rng).value().vec();
    mean += z;
    second += z * z.transpose();
  }
  mean /= draws;
  num::RowMatrix emp = second / draws - mean * mean.transpose();
  const double scale = cov.mat().cwiseAbs().maxCoeff();
  EXPECT_LT((mean - q.mean.vec()).cwiseAbs().maxCoeff(), 0.05 * std::sqrt(scale));
  EXPECT_LT((emp - cov.mat()).cwiseAbs().maxCoeff(), 0.05 * scale);
}

TEST(Recurrence, StopGradientThroughAccumulatedMean) {
  // d(sum of step-2 mean)/dθ under mean accumulation equals the gradient of
  // the step-2 projection alone: the carried mean is a constant.
  std::mt19937_64 rng(33);
  const Architecture a = small_policy_arch();
  const Model acc(a, markov(Accumulate::MeanAndPrecision), 9);
  const Model point(a, PosteriorConfig::preset(Family::Dirac), acc.params());
  const Tensor obs1 = random_tensor({1, 3}, rng), obs2 = random_tensor({1, 3}, rng);
  auto grads = [&](const Model& m) {
    num::Tape tape;
    Recurrence r(m, tape, 1);
    const std::size_t act[] = {0};
    r.advance(obs1, act, Tensor({1, 1}, {1.0}));
    r.advance(obs2, act, Tensor({1, 1}, {0.0}));
    return tape.grad(num::sum(r.mean()), r.params());
  };
  const auto ga = grads(acc), gp = grads(point);
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_EQ(ga[i], gp[i]) << acc.params().names[i];
}

// ---------------------------------------------------------------- predictive

TEST(Predictive, AveragedLogitsArithmetic) {
  const double l3 = std::log(3.0);
  const Tensor parts[] = {Tensor::vector({0, l3}), Tensor::vector({l3, 0})};
  const Tensor avg = average_logits(parts);
  EXPECT_NEAR(avg[0], l3 / 2, 1e-15);
  EXPECT_NEAR(avg[1], l3 / 2, 1e-15);
  const double p0 = 1.0 / (1.0 + std::exp(avg[1] - avg[0]));
  EXPECT_NEAR(p0, 0.5, 1e-15);
}

TEST(Predictive, SingleAndRepeatedSamples) {
  const Architecture a = small_policy_arch();
  const Model m(a, PosteriorConfig::preset(Family::Dirac), 3);
  const Tensor point = Tensor::vector({0.1, -0.2, 0.3, 0.4});
  const Tensor obs = Tensor::vector({1, 0, 0});
  std::mt19937_64 rng(1);
  const PredictiveOutput one = posterior_predictive(m, point, obs, 1, rng);
  const PredictiveOutput many = posterior_predictive(m, point, obs, 4, rng);
  EXPECT_LT(num::max_abs_diff(one.logits, many.logits), 1e-15);
  EXPECT_NEAR(one.value, many.value, 1e-15);

  // k = 1 is exactly the head applied to one sample.
  const Model lap(a, markov(), m.params());
  const GaussianBelief q{point, belief::PrecisionMatrix::scaled_identity(4, 2.0, CovarianceKind::Full)};
  std::mt19937_64 r1(7), r2(7);
  const Tensor z = belief::sample(q, r1, 1).front();
  EXPECT_EQ(posterior_predictive(lap, q, obs, 1, r2).logits, posterior_predictive(m, z, obs, 1, r1).logits);
  EXPECT_THROW(posterior_predictive(m, point, obs, 0, rng), num::ContractError);
}

TEST(Predictive, RegressionVarianceIsPositive) {
  std::mt19937_64 rng(5);
  const Architecture a = small_regression_arch();
  const Model m(a, PosteriorConfig::preset(Family::LaplaceMarkov), 3);
  const Trace tr = run(m, random_inputs(a, 3, rng));
  const PredictiveOutput out = posterior_predictive(m, tr.beliefs.back(), Tensor::vector({0.2}), 8, rng);
  EXPECT_GT(out.variance, 0.0);
  EXPECT_TRUE(std::isfinite(out.mean));
}

// ---------------------------------------------------------------- snapshot

class SnapshotTest : public ::testing::Test {
 protected:
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "lvrnn_snapshot_test";
  void SetUp() override { std::filesystem::create_directories(dir); }
  void TearDown() override { std::filesystem::remove_all(dir); }
};

TEST_F(SnapshotTest, RoundTripIsBitIdentical) {
  const Model m(small_policy_arch(), PosteriorConfig::preset(Family::Dirac), 77);
  save_snapshot(m, dir / "a.snap");
  const Model back = load_snapshot(dir / "a.snap");
  EXPECT_EQ(back.params(), m.params());
  EXPECT_EQ(back.architecture(), m.architecture());
  EXPECT_EQ(back.posterior(), m.posterior());
}

TEST_F(SnapshotTest, DiracToMarkovKeepsMeanTrajectory) {
  std::mt19937_64 rng(3);
  const Architecture a = small_policy_arch();
  const Model m(a, PosteriorConfig::preset(Family::Dirac), 78);
  save_snapshot(m, dir / "d.snap");
  const Model lap = load_as(dir / "d.snap", markov());
  const auto inputs = random_inputs(a, 10, rng);
  EXPECT_EQ(run(lap, inputs).phi, run(m, inputs).phi);
}

TEST_F(SnapshotTest, DiracToVrnnAddsFreshHead) {
  const Architecture a = small_policy_arch();
  const Model m(a, PosteriorConfig::preset(Family::Dirac), 79);
  save_snapshot(m, dir / "d.snap");
  const Model v = load_as(dir / "d.snap", PosteriorConfig::preset(Family::VRNN, CovarianceKind::Full), 5);
  const std::size_t n = a.latent_dim;
  const std::size_t head = n * posterior_head_width(n, CovarianceKind::Full) + posterior_head_width(n, CovarianceKind::Full);
  EXPECT_EQ(v.params().count() - m.params().count(), head);
  for (std::size_t i = 0; i < m.params().size(); ++i) EXPECT_EQ(v.params().values[i], m.params().values[i]);
  // And back: the head is dropped again.
  save_snapshot(v, dir / "v.snap");
  EXPECT_EQ(load_as(dir / "v.snap", markov()).params(), m.params());
}

TEST_F(SnapshotTest, ArchitectureMismatchReportsDimension) {
  const Model m(small_policy_arch(), PosteriorConfig::preset(Family::Dirac), 80);
  save_snapshot(m, dir / "d.snap");
  Architecture other = small_policy_arch();
  other.latent_dim = 8;
  try {
    load_as(dir / "d.snap", other, markov());
    FAIL() << "expected SnapshotError";
  } catch (const SnapshotError& e) {
    EXPECT_NE(std::string(e.what()).find("latent_dim expected 8, got 4"), std::string::npos) << e.what();
  }
}

TEST_F(SnapshotTest, CorruptFilesRejected) {
  {
    std::ofstream os(dir / "bad.snap", std::ios::binary);
    os << "not a snapshot";
  }
  EXPECT_THROW(read_snapshot(dir / "bad.snap"), SnapshotError);
  EXPECT_THROW(read_snapshot(dir / "missing.snap"), SnapshotError);
  const Model m(small_policy_arch(), PosteriorConfig::preset(Family::Dirac), 81);
  save_snapshot(m, dir / "t.snap");
  std::filesystem::resize_file(dir / "t.snap", std::filesystem::file_size(dir / "t.snap") - 8);
  EXPECT_THROW(read_snapshot(dir / "t.snap"), SnapshotError);
}
