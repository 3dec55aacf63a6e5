#include "lvrnn/envs/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lvrnn::envs {

using nlohmann::json;

std::string to_string(Domain d) {
  switch (d) {
    case Domain::Fourier: return "fourier";
    case Domain::Bandit: return "bandit";
    case Domain::Grid: return "grid";
  }
  return "?";
}

Domain domain_from_string(const std::string& s) {
  if (s == "fourier") return Domain::Fourier;
  if (s == "bandit") return Domain::Bandit;
  if (s == "grid") return Domain::Grid;
  throw std::invalid_argument("unknown domain '" + s + "' (expected fourier|bandit|grid)");
}

std::size_t horizon(Domain d) {
  switch (d) {
    case Domain::Fourier: return kFourierHorizon;
    case Domain::Bandit: return kBanditHorizon;
    case Domain::Grid: return kGridHorizon;
  }
  return 0;
}

std::size_t observation_dim(Domain d) {
  switch (d) {
    case Domain::Fourier: return 1;
    case Domain::Bandit: return 2;
    case Domain::Grid: return 2 * kGridSize;
  }
  return 0;
}

std::size_t num_actions(Domain d) {
  switch (d) {
    case Domain::Fourier: return 0;
    case Domain::Bandit: return kBanditArms;
    case Domain::Grid: return kGridActions;
  }
  return 0;
}

FourierTask sample_fourier(Rng& rng) {
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  FourierTask t;
  for (double& a : t.amplitudes) a = amp(rng);
  for (double& p : t.phases) p = angle(rng);
  t.shift = angle(rng);
  return t;
}

BanditTask sample_bandit(Rng& rng, Split split) {
  std::gamma_distribution<double> gamma(split == Split::Train ? kBanditAlphaTrain : kBanditAlphaTest, 1.0);
  BanditTask t;
  double total = 0.0;
  // With α < 1 all draws can underflow to zero; redraw in that case.
  while (!(total > 0.0)) {
    total = 0.0;
    for (double& p : t.probs) total += (p = gamma(rng));
  }
  for (double& p : t.probs) p /= total;
  return t;
}

GridTask sample_grid(Rng& rng) {
  std::uniform_int_distribution<int> cell(0, kGridSize - 1);
  GridTask t;
  t.start = {cell(rng), cell(rng)};
  do {
    t.goal = {cell(rng), cell(rng)};
  } while (t.goal == t.start);
  return t;
}

Task sample_task(Domain d, Rng& rng, Split split) {
  switch (d) {
    case Domain::Fourier: return sample_fourier(rng);
    case Domain::Bandit: return sample_bandit(rng, split);
    case Domain::Grid: return sample_grid(rng);
  }
  throw std::invalid_argument("sample_task: bad domain");
}

double fourier_eval(const FourierTask& task, double x) {
  double y = task.amplitudes[0];
  for (std::size_t i = 1; i <= kFourierHarmonics; ++i)
    y += task.amplitudes[i] * std::cos(static_cast<double>(i) * std::numbers::pi * (x + task.shift) + task.phases[i - 1]);
  return y;
}

FourierDataset fourier_dataset(const FourierTask& task, std::size_t t, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FourierDataset d;
  for (std::size_t i = 0; i < t; ++i) {
    d.x.push_back(u(rng));
    d.y.push_back(fourier_eval(task, d.x.back()));
  }
  return d;
}

Tensor bandit_initial_observation() { return Tensor({2}); }

Transition bandit_step(const BanditTask& task, std::size_t action, Rng& rng) {
  if (action >= kBanditArms) throw std::out_of_range("bandit action " + std::to_string(action) + " out of range");
  const double p = task.probs[action];
  // p = 1 and p = 0 are exact; bernoulli_distribution handles both.
  const double r = std::bernoulli_distribution(std::clamp(p, 0.0, 1.0))(rng) ? 1.0 : 0.0;
  return {Tensor::vector({r, 1.0}), action, r, 0.0, true};
}

GridState grid_reset(const GridTask& task) { return {task.start, 0}; }

Tensor grid_observation(Cell c) {
  Tensor o({2 * kGridSize});
  o[static_cast<std::size_t>(c.row)] = 1.0;
  o[static_cast<std::size_t>(kGridSize + c.col)] = 1.0;
  return o;
}

namespace {

Cell moved(Cell c, std::size_t action) {
  switch (static_cast<Move>(action)) {
    case Move::Up: c.row = std::max(0, c.row - 1); break;
    case Move::Down: c.row = std::min(kGridSize - 1, c.row + 1); break;
    case Move::Left: c.col = std::max(0, c.col - 1); break;
    case Move::Right: c.col = std::min(kGridSize - 1, c.col + 1); break;
  }
  return c;
}

}  // namespace

Transition grid_step(const GridTask& task, GridState& state, std::size_t action) {
  if (action >= kGridActions) throw std::out_of_range("grid action " + std::to_string(action) + " out of range");
  state.position = moved(state.position, action);
  ++state.steps_in_episode;
  Transition tr;
  tr.action = action;
  if (state.position == task.goal) {
    tr.reward = 1.0;
    tr.episode_done = true;
  } else if (state.steps_in_episode >= kGridEpisodeLimit) {
    tr.episode_done = true;
  }
  if (tr.episode_done) {
    state = grid_reset(task);
    tr.discount = 0.0;
  } else {
    tr.discount = kGridDiscount;
  }
  tr.observation = grid_observation(state.position);
  return tr;
}

std::size_t grid_shortest_path(const GridTask& task) {
  std::array<int, kGridSize * kGridSize> dist;
  dist.fill(-1);
  auto id = [](Cell c) { return static_cast<std::size_t>(c.row * kGridSize + c.col); };
  std::queue<Cell> q;
  dist[id(task.start)] = 0;
  q.push(task.start);
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    if (c == task.goal) return static_cast<std::size_t>(dist[id(c)]);
    for (std::size_t a = 0; a < kGridActions; ++a) {
      const Cell n = moved(c, a);
      if (dist[id(n)] < 0) {
        dist[id(n)] = dist[id(c)] + 1;
        q.push(n);
      }
    }
  }
  throw std::logic_error("grid goal unreachable");
}

json task_to_json(const Task& task) {
  if (const auto* f = std::get_if<FourierTask>(&task))
    return {{"domain", "fourier"}, {"amplitudes", f->amplitudes}, {"phases", f->phases}, {"shift", f->shift}};
  if (const auto* b = std::get_if<BanditTask>(&task)) return {{"domain", "bandit"}, {"probs", b->probs}};
  const auto& g = std::get<GridTask>(task);
  return {{"domain", "grid"},
          {"start", {g.start.row, g.start.col}},
          {"goal", {g.goal.row, g.goal.col}}};
}

Task task_from_json(const json& j) {
  const Domain d = domain_from_string(j.at("domain").get<std::string>());
  switch (d) {
    case Domain::Fourier: {
      FourierTask f;
      f.amplitudes = j.at("amplitudes").get<decltype(f.amplitudes)>();
      f.phases = j.at("phases").get<decltype(f.phases)>();
      f.shift = j.at("shift").get<double>();
      return f;
    }
    case Domain::Bandit: {
      BanditTask b;
      b.probs = j.at("probs").get<decltype(b.probs)>();
      return b;
    }
    case Domain::Grid: {
      const auto s = j.at("start").get<std::array<int, 2>>();
      const auto g = j.at("goal").get<std::array<int, 2>>();
      return GridTask{{s[0], s[1]}, {g[0], g[1]}};
    }
  }
  throw std::invalid_argument("task_from_json: bad domain");
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

}  // namespace lvrnn::envs
