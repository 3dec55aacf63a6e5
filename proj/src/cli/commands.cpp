#include "lvrnn/cli/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <future>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "lvrnn/analysis/analysis.hpp"
#include "lvrnn/model/snapshot.hpp"

namespace lvrnn::cli {

namespace fs = std::filesystem;
using model::ConfigError;
using model::Family;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void add_aggregated(std::vector<MetricsRow>& rows, const ExperimentConfig& cfg, const std::string& seed,
                    const std::string& metric, std::size_t first_step,
                    const std::vector<std::vector<double>>& per_task) {
  const auto agg = analysis::aggregate_traces(per_task);
  for (std::size_t t = 0; t < agg.size(); ++t)
    rows.push_back({cfg.id, seed, "eval", first_step + t, metric, agg[t].mean, agg[t].lo, agg[t].hi});
}

std::uint64_t head_seed(std::uint64_t seed) {
  return envs::stream_seed(seed, 0, static_cast<std::uint64_t>(train::Phase::Head));
}

std::vector<MetricsRow> run_seed(Command cmd, const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir,
                                 const RunOptions& opts) {
  const std::string s = std::to_string(seed);
  std::vector<MetricsRow> rows;
  std::optional<fs::path> snap;
  if (opts.snapshot) snap = snapshot_for_seed(*opts.snapshot, seed);

  if (cmd == Command::Eval) {
    if (!snap) throw model::SnapshotError("eval requires --snapshot");
    if (!fs::exists(*snap)) throw model::SnapshotError("snapshot not found: " + snap->string());
    const auto m = model::load_as(*snap, cfg.train.architecture, cfg.train.posterior, head_seed(seed));
    return evaluation_rows(m, cfg, seed);
  }
  if (cmd == Command::Posthoc && snap && fs::exists(*snap)) {
    const auto source = model::read_snapshot(*snap).posterior.family;
    if (source != Family::Dirac)
      throw ConfigError("snapshot", "post-hoc posteriors are built from a dirac-trained snapshot, got " +
                                        model::to_string(source));
  }

  const train::Regime regime = cmd == Command::Train      ? train::Regime::Full
                               : cmd == Command::Finetune ? train::Regime::Finetune
                                                          : train::Regime::Posthoc;
  const bool regression = cfg.train.domain == envs::Domain::Fourier;
  const auto result = train::run_regime(regime, cfg.train, seed, snap, [&](const train::UpdateStats& u) {
    rows.push_back(point_row(cfg.id, s, "train", u.step, "loss", u.loss));
    rows.push_back(point_row(cfg.id, s, "train", u.step, regression ? "nll" : "return", u.performance));
    rows.push_back(point_row(cfg.id, s, "train", u.step, "kl", u.kl));
    rows.push_back(point_row(cfg.id, s, "train", u.step, "grad_norm", u.grad_norm));
    if (u.step % 100 == 0)
      spdlog::info("{} seed {} update {}: loss {:.4f}, {} {:.4f}", cfg.id, seed, u.step, u.loss,
                   regression ? "nll" : "return", u.performance);
  });
  const auto& f = result.final_model;
  const model::Model final_model(f.architecture, f.posterior, f.params);
  if (cmd != Command::Posthoc) {
    const fs::path sd = dir / "snapshots" / ("seed-" + s);
    fs::create_directories(sd);
    for (const auto& p : result.snapshots)
      model::save_snapshot(model::Model(p.snapshot.architecture, p.snapshot.posterior, p.snapshot.params),
                           sd / fmt::format("step-{}.lvrnn", p.step));
    model::save_snapshot(final_model, sd / "final.lvrnn");
  }
  auto eval = evaluation_rows(final_model, cfg, seed);
  rows.insert(rows.end(), eval.begin(), eval.end());
  return rows;
}

struct PlotSpec {
  const char* file;
  const char* phase;
  std::vector<const char*> metrics;
  const char* title;
  const char* xlabel;
};

const std::vector<PlotSpec>& plot_specs() {
  static const std::vector<PlotSpec> specs{
      {"training_return.svg", "train", {"return"}, "Average training return", "update"},
      {"training_nll.svg", "train", {"nll"}, "Training predictive NLL", "update"},
      {"test_ce.svg", "eval", {"predictive_ce"}, "Test predictive cross-entropy", "t"},
      {"entropy.svg", "eval", {"entropy"}, "Posterior entropy", "t"},
      {"consecutive_kl.svg", "eval", {"consecutive_kl"}, "KL(q_t || q_t-1)", "t"},
      {"cumulative_regret.svg", "eval", {"cumulative_regret"}, "Cumulative regret", "t"},
  };
  return specs;
}

}  // namespace

std::string to_string(Command c) {
  switch (c) {
    case Command::Train: return "train";
    case Command::Finetune: return "finetune";
    case Command::Posthoc: return "posthoc";
    case Command::Eval: return "eval";
  }
  return "?";
}

fs::path default_out_root() {
  const char* env = std::getenv("LVRNN_OUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path snapshot_for_seed(const fs::path& pattern, std::uint64_t seed) {
  std::string p = pattern.string();
  for (auto pos = p.find("{seed}"); pos != std::string::npos; pos = p.find("{seed}"))
    p.replace(pos, 6, std::to_string(seed));
  return p;
}

std::vector<MetricsRow> evaluation_rows(const model::Model& model, const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::string s = std::to_string(seed);
  const std::size_t horizon = cfg.train.horizon();
  std::vector<MetricsRow> rows;
  if (cfg.train.domain == envs::Domain::Fourier) {
    add_aggregated(rows, cfg, s, "predictive_ce", 1,
                   analysis::evaluate_cross_entropy(model, cfg.eval.tasks, horizon, seed, cfg.eval.samples));
    return rows;
  }
  train::RolloutOptions opt;
  opt.n_z = cfg.train.loss.n_z;
  opt.greedy = cfg.eval.greedy;
  opt.latent_mean = cfg.eval.act_at_mean;
  const auto ev = analysis::evaluate_control(model, cfg.train.domain, cfg.eval.tasks, horizon, seed, opt);
  const auto ret = analysis::aggregate(ev.returns);
  rows.push_back({cfg.id, s, "eval", horizon, "return", ret.mean, ret.lo, ret.hi});
  add_aggregated(rows, cfg, s, "cumulative_regret", 1, ev.regret);
  if (!ev.entropy.empty()) {
    add_aggregated(rows, cfg, s, "entropy", 2, ev.entropy);
    add_aggregated(rows, cfg, s, "consecutive_kl", 2, ev.consecutive_kl);
  }
  return rows;
}

fs::path run_experiment(Command cmd, const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  if (cmd == Command::Posthoc && cfg.train.posterior.family == Family::VRNN)
    throw ConfigError("posterior.family", "a VRNN posterior needs a trained head; use finetune instead of posthoc");
  if (cmd != Command::Train && !opts.snapshot)
    throw model::SnapshotError(to_string(cmd) + " requires --snapshot");

  const fs::path dir = opts.out_root / cfg.id;
  fs::create_directories(dir / "snapshots");
  fs::create_directories(dir / "plots");
  write_text(dir / "config.resolved", resolved_config(cfg));
  const std::string started = utc_now();
  spdlog::info("{} {} -> {}", to_string(cmd), cfg.id, dir.string());

  std::vector<std::vector<MetricsRow>> per_seed(cfg.seeds.size());
  const std::size_t jobs = std::max<std::size_t>(opts.jobs, 1);
  for (std::size_t first = 0; first < cfg.seeds.size(); first += jobs) {
    std::vector<std::future<std::vector<MetricsRow>>> running;
    const std::size_t last = std::min(first + jobs, cfg.seeds.size());
    for (std::size_t i = first; i < last; ++i)
      running.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, run_seed, cmd,
                                   std::cref(cfg), cfg.seeds[i], std::cref(dir), std::cref(opts)));
    for (std::size_t i = first; i < last; ++i) per_seed[i] = running[i - first].get();
  }

  std::vector<MetricsRow> rows;
  for (auto& r : per_seed) rows.insert(rows.end(), r.begin(), r.end());
  write_metrics(dir / "metrics.csv", rows);
  write_plots(aggregate_rows(rows), dir / "plots");

  nlohmann::json manifest{{"command", to_string(cmd)}, {"experiment", cfg.id},     {"seeds", cfg.seeds},
                          {"started", started},        {"finished", utc_now()}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return dir;
}

std::vector<fs::path> run_grid(Command cmd, const ExperimentConfig& cfg, const RunOptions& opts) {
  const GridExpansion g = expand_grid(cfg, cfg.grid.value_or(full_grid_axes()));
  for (const auto& reason : g.skipped) spdlog::warn("grid: skipped {}", reason);
  spdlog::info("grid: {} valid combinations, {} skipped", g.configs.size(), g.skipped.size());
  std::vector<fs::path> dirs;
  for (const auto& c : g.configs) dirs.push_back(run_experiment(cmd, c, opts));
  return dirs;
}

std::vector<MetricsRow> aggregate_rows(const std::vector<MetricsRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::size_t, std::string>;
  std::map<Key, std::size_t> index;
  std::vector<Key> order;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    const Key k{r.experiment_id, r.phase, r.step, r.metric};
    auto [it, fresh] = index.try_emplace(k, order.size());
    if (fresh) {
      order.push_back(k);
      values.emplace_back();
    }
    values[it->second].push_back(r.value);
  }
  std::vector<MetricsRow> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto a = analysis::aggregate(values[i]);
    const auto& [id, phase, step, metric] = order[i];
    out.push_back({id, "all", phase, step, metric, a.mean, a.lo, a.hi});
  }
  return out;
}

std::vector<fs::path> write_plots(const std::vector<MetricsRow>& aggregated, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> files;
  for (const auto& spec : plot_specs()) {
    std::vector<Series> series;
    std::map<std::string, std::size_t> by_id;
    for (const auto& r : aggregated) {
      if (r.phase != spec.phase || std::find(spec.metrics.begin(), spec.metrics.end(), r.metric) == spec.metrics.end())
        continue;
      auto [it, fresh] = by_id.try_emplace(r.experiment_id, series.size());
      if (fresh) series.push_back({r.experiment_id, {}, {}, {}, {}});
      Series& s = series[it->second];
      s.x.push_back(static_cast<double>(r.step));
      s.mean.push_back(r.value);
      s.lo.push_back(r.ci_lo);
      s.hi.push_back(r.ci_hi);
    }
    if (series.empty()) continue;
    const fs::path file = dir / spec.file;
    write_text(file, render_svg(spec.title, spec.xlabel, spec.metrics.front(), series));
    files.push_back(file);
  }
  return files;
}

std::vector<MetricsRow> run_stats(const std::vector<fs::path>& runs, const fs::path& out) {
  if (runs.empty()) throw std::invalid_argument("stats needs at least one run");
  std::vector<MetricsRow> rows;
  std::vector<std::string> bad;
  for (const auto& r : runs) {
    const fs::path file = fs::is_directory(r) ? r / "metrics.csv" : r;
    try {
      auto part = read_metrics(file);
      rows.insert(rows.end(), part.begin(), part.end());
    } catch (const SchemaError& e) {
      bad.push_back(e.what());
    }
  }
  if (!bad.empty()) {
    std::string msg = "schema mismatch in " + std::to_string(bad.size()) + " file(s):";
    for (const auto& b : bad) msg += "\n  " + b;
    throw SchemaError(msg);
  }
  const auto agg = aggregate_rows(rows);
  fs::create_directories(out);
  write_metrics(out / "stats.csv", agg);
  write_plots(agg, out / "plots");
  return agg;
}

}  // namespace lvrnn::cli
