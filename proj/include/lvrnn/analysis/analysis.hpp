#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lvrnn/envs/envs.hpp"
#include "lvrnn/model/model.hpp"
#include "lvrnn/train/losses.hpp"

namespace lvrnn::analysis {

using model::Model;
using num::Tensor;

/// Values of one metric over evaluation timesteps `start`, `start + 1`, ...
struct MetricTrace {
  std::string metric;
  std::size_t start = 1;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::size_t task = 0;
};

struct AggregateResult {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
  bool degenerate = false;  // n < 2: the interval collapses to the mean
};

inline constexpr double kConfidence = 0.99;
inline constexpr double kVarianceFloor = 1e-6;
inline constexpr std::size_t kPredictiveSamples = 30;
inline constexpr std::size_t kTestGridPoints = 100;

/// Two-sided normal-approximation interval mean ± z_{(1+level)/2}·s/√n.
AggregateResult aggregate(std::span<const double> values, double level = kConfidence);
/// Per-timestep aggregate of equally long traces.
std::vector<AggregateResult> aggregate_traces(const std::vector<std::vector<double>>& traces,
                                              double level = kConfidence);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> a, std::span<const double> b);
/// Elementwise median of equally long traces.
std::vector<double> median_trace(const std::vector<std::vector<double>>& traces);
double median(std::vector<double> v);

// ---------------------------------------------------------------- regression

/// Evenly spaced test inputs on [−1, 1].
std::vector<double> test_grid(std::size_t points = kTestGridPoints);

/// −ln((1/m) Σᵢ N(y; μᵢ, max(vᵢ, kVarianceFloor))), computed stably.
double mixture_nll(double y, std::span<const double> means, std::span<const double> variances);

/// At each t = 1..T the model has seen the first t context points. The value
/// is the mean over the test grid of −ln p̂(f(x) | x, H_t), where p̂ is
/// the m-sample Monte-Carlo mixture of Gaussian head outputs with variances
/// floored at kVarianceFloor.
MetricTrace predictive_cross_entropy(const Model& model, const envs::FourierTask& task,
                                     const envs::FourierDataset& context, std::size_t m, std::mt19937_64& rng,
                                     std::span<const double> grid);

// ---------------------------------------------------------------- posterior statistics

/// Per-trajectory inputs of a stored rollout.
std::vector<model::StepInput> trajectory(const train::Rollout& rollout, std::size_t b);

struct PosteriorTraces {
  bool supported = false;  // false for the Dirac family
  MetricTrace entropy;     // t = 2..T
  MetricTrace consecutive_kl;
};

/// Entropy of q_t and KL(q_t ‖ q_{t−1}) for t = 2..T, where q_t is the belief
/// after t inputs.
PosteriorTraces posterior_trace(const Model& model, std::span<const model::StepInput> inputs);

// ---------------------------------------------------------------- regret

/// Σ_{s≤t} (max_i p_i − p_{a_s}).
MetricTrace cumulative_regret(const envs::BanditTask& task, std::span<const std::size_t> actions);

/// Per completed episode the optimal discounted return γ^{d−1} (d the
/// shortest-path length) minus the achieved one (γ^{k−1} when the goal is
/// reached after k steps, 0 on timeout), added when the episode ends.
MetricTrace cumulative_regret(const envs::GridTask& task, std::span<const double> rewards,
                              std::span<const double> discounts);

/// Regret trace of trajectory `b` of a bandit or grid rollout.
MetricTrace cumulative_regret(const train::Rollout& rollout, std::size_t b);

// ---------------------------------------------------------------- evaluation protocols

struct ControlEvaluation {
  std::vector<double> returns;                    // per test task
  std::vector<std::vector<double>> regret;        // per test task, t = 1..T
  std::vector<std::vector<double>> entropy;       // per test task, t = 2..T (empty for Dirac)
  std::vector<std::vector<double>> consecutive_kl;
};

/// Runs `model` on `tasks` test tasks drawn from the test split of `seed`.
ControlEvaluation evaluate_control(const Model& model, envs::Domain domain, std::size_t tasks, std::size_t horizon,
                                   std::uint64_t seed, const train::RolloutOptions& options = {});

/// Uniform-random policy on the same test tasks and environment streams.
ControlEvaluation evaluate_uniform(envs::Domain domain, std::size_t tasks, std::size_t horizon, std::uint64_t seed);

/// Predictive CE traces (one per test task) on the regression domain.
std::vector<std::vector<double>> evaluate_cross_entropy(const Model& model, std::size_t tasks, std::size_t horizon,
                                                        std::uint64_t seed, std::size_t m = kPredictiveSamples);

}  // namespace lvrnn::analysis
