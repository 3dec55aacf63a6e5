#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lvrnn/num/tensor.hpp"

namespace lvrnn::envs {

using num::Tensor;
using Rng = std::mt19937_64;

enum class Domain { Fourier, Bandit, Grid };
enum class Split { Train, Test };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

inline constexpr std::size_t kFourierHarmonics = 4;
inline constexpr std::size_t kFourierHorizon = 50;
inline constexpr std::size_t kBanditArms = 5;
inline constexpr std::size_t kBanditHorizon = 50;
inline constexpr double kBanditAlphaTrain = 0.2;
inline constexpr double kBanditAlphaTest = 0.3;
inline constexpr int kGridSize = 5;
inline constexpr std::size_t kGridActions = 4;
inline constexpr std::size_t kGridHorizon = 100;
inline constexpr std::size_t kGridEpisodeLimit = 15;
inline constexpr double kGridDiscount = 0.9;

/// Default horizon, observation width and action count per domain
/// (0 actions: supervised regression).
std::size_t horizon(Domain d);
std::size_t observation_dim(Domain d);
std::size_t num_actions(Domain d);

/// One environment transition. `discount` is 0 exactly at episode boundaries.
struct Transition {
  Tensor observation;
  std::size_t action = 0;
  double reward = 0.0;
  double discount = 0.0;
  bool episode_done = false;
};

/// y = A0 + Σ_{i=1..4} A_i cos(iπ(x + c) + φ_i)
struct FourierTask {
  std::array<double, kFourierHarmonics + 1> amplitudes{};
  std::array<double, kFourierHarmonics> phases{};
  double shift = 0.0;
  friend bool operator==(const FourierTask&, const FourierTask&) = default;
};

struct BanditTask {
  std::array<double, kBanditArms> probs{};
  friend bool operator==(const BanditTask&, const BanditTask&) = default;
};

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct GridTask {
  Cell start;
  Cell goal;
  friend bool operator==(const GridTask&, const GridTask&) = default;
};

using Task = std::variant<FourierTask, BanditTask, GridTask>;

FourierTask sample_fourier(Rng& rng);
/// Dirichlet(α·1) via normalized Gamma(α, 1) draws; α = 0.2 (train) or 0.3 (test).
BanditTask sample_bandit(Rng& rng, Split split);
/// Uniform start and goal with start ≠ goal.
GridTask sample_grid(Rng& rng);
Task sample_task(Domain d, Rng& rng, Split split);

double fourier_eval(const FourierTask& task, double x);

struct FourierDataset {
  std::vector<double> x;
  std::vector<double> y;
};
/// T inputs x ~ Unif(−1, 1) with noiseless targets.
FourierDataset fourier_dataset(const FourierTask& task, std::size_t t, Rng& rng);

/// Bandit agent input before any pull: [0, 0]; afterwards [reward, 1].
Tensor bandit_initial_observation();
/// reward ~ Bernoulli(p_action), observation [reward, 1], discount 0.
Transition bandit_step(const BanditTask& task, std::size_t action, Rng& rng);

enum class Move : std::size_t { Up = 0, Down = 1, Left = 2, Right = 3 };

struct GridState {
  Cell position;
  std::size_t steps_in_episode = 0;
};

GridState grid_reset(const GridTask& task);
/// Concatenated row and column one-hots (10 values).
Tensor grid_observation(Cell c);
/// Deterministic move clipped at the walls. Reaching the goal pays +1 and
/// ends the episode; the 15th step without the goal also ends it. Both
/// return the agent to the start with discount 0. Otherwise the discount is 0.9.
Transition grid_step(const GridTask& task, GridState& state, std::size_t action);
/// Shortest path length from start to goal (BFS over the open grid).
std::size_t grid_shortest_path(const GridTask& task);

nlohmann::json task_to_json(const Task& task);
Task task_from_json(const nlohmann::json& j);

/// Counter-based stream seeding: a splitmix64 hash of (seed, a, b), so that
/// every (seed, task index, phase) triple has an independent generator.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);
inline Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) { return Rng(stream_seed(seed, a, b)); }

}  // namespace lvrnn::envs
