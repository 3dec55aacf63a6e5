#include "lvrnn/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "lvrnn/belief/gaussian.hpp"
#include "lvrnn/train/regime.hpp"

namespace lvrnn::analysis {

using num::ContractError;
using num::DimensionError;

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

std::uint64_t eval_seed(std::uint64_t seed, std::uint64_t slot) {
  return envs::stream_seed(seed, slot, static_cast<std::uint64_t>(train::Phase::Evaluation));
}

std::vector<envs::Task> test_tasks(envs::Domain d, std::size_t n, std::uint64_t seed) {
  envs::Rng rng(eval_seed(seed, 0));
  std::vector<envs::Task> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(envs::sample_task(d, rng, envs::Split::Test));
  return out;
}

}  // namespace

AggregateResult aggregate(std::span<const double> values, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ContractError("aggregate: level must lie in (0, 1)");
  AggregateResult r;
  r.n = values.size();
  if (values.empty()) {
    r.mean = r.lo = r.hi = std::numeric_limits<double>::quiet_NaN();
    r.degenerate = true;
    return r;
  }
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(r.n);
  if (r.n < 2) {
    r.lo = r.hi = r.mean;
    r.degenerate = true;
    return r;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  const double se = std::sqrt(ss / static_cast<double>(r.n - 1) / static_cast<double>(r.n));
  const double z = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + level));
  r.lo = r.mean - z * se;
  r.hi = r.mean + z * se;
  return r;
}

std::vector<AggregateResult> aggregate_traces(const std::vector<std::vector<double>>& traces, double level) {
  if (traces.empty()) return {};
  const std::size_t len = traces.front().size();
  std::vector<AggregateResult> out;
  std::vector<double> column(traces.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (traces[i].size() != len) throw DimensionError("aggregate_traces: traces differ in length");
      column[i] = traces[i][t];
    }
    out.push_back(aggregate(column, level));
  }
  return out;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw DimensionError("spearman", {a.size()}, {b.size()});
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of an empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

std::vector<double> median_trace(const std::vector<std::vector<double>>& traces) {
  if (traces.empty()) return {};
  std::vector<double> out;
  for (std::size_t t = 0; t < traces.front().size(); ++t) {
    std::vector<double> column;
    for (const auto& tr : traces) column.push_back(tr.at(t));
    out.push_back(median(std::move(column)));
  }
  return out;
}

// ---------------------------------------------------------------- regression

std::vector<double> test_grid(std::size_t points) {
  if (points < 2) throw ContractError("test_grid: need at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

double mixture_nll(double y, std::span<const double> means, std::span<const double> variances) {
  if (means.empty() || means.size() != variances.size())
    throw DimensionError("mixture_nll", {means.size()}, {variances.size()});
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  std::vector<double> logp(means.size());
  for (std::size_t s = 0; s < means.size(); ++s) {
    const double var = std::max(variances[s], kVarianceFloor);
    const double d = y - means[s];
    logp[s] = -0.5 * std::log(var) - log_norm - 0.5 * d * d / var;
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  double acc = 0.0;
  for (double l : logp) acc += std::exp(l - mx);
  return -(mx + std::log(acc / static_cast<double>(means.size())));
}

MetricTrace predictive_cross_entropy(const Model& model, const envs::FourierTask& task,
                                     const envs::FourierDataset& context, std::size_t m, std::mt19937_64& rng,
                                     std::span<const double> grid) {
  if (m < 1) throw ContractError("predictive_cross_entropy: m must be >= 1");
  if (model.architecture().head != model::HeadKind::Regression)
    throw ContractError("predictive_cross_entropy: model has no regression head");
  const std::size_t g = grid.size(), n = model.latent_dim();
  Tensor xs({g * m, 1});
  std::vector<double> targets(g);
  for (std::size_t i = 0; i < g; ++i) {
    targets[i] = envs::fourier_eval(task, grid[i]);
    for (std::size_t s = 0; s < m; ++s) xs(s * g + i, 0) = grid[i];
  }

  MetricTrace out;
  out.metric = "predictive_ce";
  model::PosteriorState state = model::initial_state(model);
  for (std::size_t t = 0; t < context.x.size(); ++t) {
    auto [next, belief] = model::step(model, state, {Tensor({1}, {context.x[t]}), 0, context.y[t]});
    state = std::move(next);
    std::vector<Tensor> latents;
    if (const auto* point = std::get_if<Tensor>(&belief)) {
      latents.assign(m, *point);
    } else {
      latents = belief::sample(std::get<belief::GaussianBelief>(belief), rng, m);
    }
    Tensor z({g * m, n});
    for (std::size_t s = 0; s < m; ++s)
      for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < n; ++j) z(s * g + i, j) = latents[s][j];

    num::Tape tape(false);
    model::Recurrence heads(model, tape, g * m);
    const Tensor o = heads.regression_head(tape.constant(z), heads.embed_state(xs)).value();
    double ce = 0.0;
    std::vector<double> means(m), vars(m);
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t s = 0; s < m; ++s) {
        means[s] = o(s * g + i, 0);
        vars[s] = std::exp(std::clamp(o(s * g + i, 1), -13.8, 6.0));
      }
      ce += mixture_nll(targets[i], means, vars);
    }
    out.values.push_back(ce / static_cast<double>(g));
  }
  return out;
}

// ---------------------------------------------------------------- posterior statistics

std::vector<model::StepInput> trajectory(const train::Rollout& ro, std::size_t b) {
  if (b >= ro.batch) throw std::out_of_range("trajectory index");
  std::vector<model::StepInput> out;
  for (std::size_t t = 0; t < ro.horizon; ++t) {
    const Tensor& obs = ro.observations[t + 1];
    const std::size_t os = obs.dim(1);
    Tensor row({os}, std::vector<double>(obs.data().begin() + static_cast<std::ptrdiff_t>(b * os),
                                         obs.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * os)));
    out.push_back({std::move(row), ro.actions[t][b], ro.rewards(t, b)});
  }
  return out;
}

PosteriorTraces posterior_trace(const Model& model, std::span<const model::StepInput> inputs) {
  PosteriorTraces out;
  out.entropy.metric = "entropy";
  out.consecutive_kl.metric = "consecutive_kl";
  out.entropy.start = out.consecutive_kl.start = 2;
  if (model.posterior().family == model::Family::Dirac) return out;
  out.supported = true;
  model::PosteriorState state = model::initial_state(model);
  std::optional<belief::GaussianBelief> prev;
  for (const auto& in : inputs) {
    auto [next, b] = model::step(model, state, in);
    state = std::move(next);
    const auto& q = std::get<belief::GaussianBelief>(b);
    if (prev) {
      out.entropy.values.push_back(belief::entropy(q));
      out.consecutive_kl.values.push_back(belief::kl(q, *prev));
    }
    prev = q;
  }
  return out;
}

// ---------------------------------------------------------------- regret

MetricTrace cumulative_regret(const envs::BanditTask& task, std::span<const std::size_t> actions) {
  const double best = *std::max_element(task.probs.begin(), task.probs.end());
  MetricTrace out;
  out.metric = "cumulative_regret";
  double acc = 0.0;
  for (std::size_t a : actions) {
    acc += best - task.probs.at(a);
    out.values.push_back(acc);
  }
  return out;
}

MetricTrace cumulative_regret(const envs::GridTask& task, std::span<const double> rewards,
                              std::span<const double> discounts) {
  if (rewards.size() != discounts.size()) throw DimensionError("cumulative_regret", {rewards.size()}, {discounts.size()});
  const double optimal = std::pow(envs::kGridDiscount, static_cast<double>(envs::grid_shortest_path(task)) - 1.0);
  MetricTrace out;
  out.metric = "cumulative_regret";
  double acc = 0.0;
  std::size_t k = 0;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    ++k;
    if (discounts[t] == 0.0) {
      const double achieved = rewards[t] > 0.0 ? std::pow(envs::kGridDiscount, static_cast<double>(k) - 1.0) : 0.0;
      acc += optimal - achieved;
      k = 0;
    }
    out.values.push_back(acc);
  }
  return out;
}

MetricTrace cumulative_regret(const train::Rollout& ro, std::size_t b) {
  if (const auto* bandit = std::get_if<envs::BanditTask>(&ro.tasks.at(b))) {
    std::vector<std::size_t> actions;
    for (std::size_t t = 0; t < ro.horizon; ++t) actions.push_back(ro.actions[t][b]);
    return cumulative_regret(*bandit, actions);
  }
  std::vector<double> r, d;
  for (std::size_t t = 0; t < ro.horizon; ++t) {
    r.push_back(ro.rewards(t, b));
    d.push_back(ro.discounts(t, b));
  }
  return cumulative_regret(std::get<envs::GridTask>(ro.tasks.at(b)), r, d);
}

// ---------------------------------------------------------------- evaluation protocols

ControlEvaluation evaluate_control(const Model& model, envs::Domain domain, std::size_t tasks, std::size_t horizon,
                                   std::uint64_t seed, const train::RolloutOptions& options) {
  train::RolloutOptions opt = options;
  opt.record_posterior = false;
  const train::Rollout ro = train::collect_rollout(model, domain, test_tasks(domain, tasks, seed), horizon,
                                                   eval_seed(seed, 1), eval_seed(seed, 2), opt);
  ControlEvaluation out;
  out.returns = ro.returns();
  for (std::size_t b = 0; b < ro.batch; ++b) {
    out.regret.push_back(cumulative_regret(ro, b).values);
    const auto inputs = trajectory(ro, b);
    const PosteriorTraces pt = posterior_trace(model, inputs);
    if (pt.supported) {
      out.entropy.push_back(pt.entropy.values);
      out.consecutive_kl.push_back(pt.consecutive_kl.values);
    }
  }
  return out;
}

ControlEvaluation evaluate_uniform(envs::Domain domain, std::size_t tasks, std::size_t horizon, std::uint64_t seed) {
  if (domain == envs::Domain::Fourier) throw ContractError("evaluate_uniform: the regression domain has no actions");
  const auto ts = test_tasks(domain, tasks, seed);
  const std::size_t a_n = envs::num_actions(domain);
  ControlEvaluation out;
  for (std::size_t b = 0; b < ts.size(); ++b) {
    envs::Rng rng = envs::stream(eval_seed(seed, 1), b);
    std::uniform_int_distribution<std::size_t> pick(0, a_n - 1);
    std::vector<std::size_t> actions;
    std::vector<double> rewards, discounts;
    envs::GridState gs;
    if (domain == envs::Domain::Grid) gs = envs::grid_reset(std::get<envs::GridTask>(ts[b]));
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t a = pick(rng);
      const envs::Transition tr = domain == envs::Domain::Bandit
                                      ? envs::bandit_step(std::get<envs::BanditTask>(ts[b]), a, rng)
                                      : envs::grid_step(std::get<envs::GridTask>(ts[b]), gs, a);
      actions.push_back(a);
      rewards.push_back(tr.reward);
      discounts.push_back(tr.discount);
    }
    out.returns.push_back(std::accumulate(rewards.begin(), rewards.end(), 0.0));
    out.regret.push_back(domain == envs::Domain::Bandit
                             ? cumulative_regret(std::get<envs::BanditTask>(ts[b]), actions).values
                             : cumulative_regret(std::get<envs::GridTask>(ts[b]), rewards, discounts).values);
  }
  return out;
}

std::vector<std::vector<double>> evaluate_cross_entropy(const Model& model, std::size_t tasks, std::size_t horizon,
                                                        std::uint64_t seed, std::size_t m) {
  envs::Rng task_rng(eval_seed(seed, 0));
  const auto grid = test_grid();
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < tasks; ++i) {
    const envs::FourierTask task = envs::sample_fourier(task_rng);
    const envs::FourierDataset context = envs::fourier_dataset(task, horizon, task_rng);
    std::mt19937_64 rng = envs::stream(eval_seed(seed, 2), i);
    out.push_back(predictive_cross_entropy(model, task, context, m, rng, grid).values);
  }
  return out;
}

}  // namespace lvrnn::analysis
