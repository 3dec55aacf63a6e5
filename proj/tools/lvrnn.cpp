#include <CLI11.hpp>

#include <charconv>
#include <iostream>

#include <spdlog/spdlog.h>

#include "lvrnn/cli/commands.hpp"
#include "lvrnn/model/snapshot.hpp"

namespace fs = std::filesystem;
using namespace lvrnn;

namespace {

// "3", "1,2,5" or "1-5".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  auto number = [&](std::string_view s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw model::ConfigError("--seeds", "bad seed list '" + text + "'");
    return v;
  };
  std::vector<std::uint64_t> out;
  std::string_view rest(text);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    if (const auto dash = item.find('-'); dash != std::string_view::npos) {
      const auto lo = number(item.substr(0, dash)), hi = number(item.substr(dash + 1));
      if (hi < lo) throw model::ConfigError("--seeds", "empty range '" + std::string(item) + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(number(item));
    }
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return out;
}

struct RunFlags {
  std::string config, snapshot, out, family, seeds;
  std::optional<std::uint64_t> seed;
  bool grid = false;
  std::size_t jobs = 1;
};

CLI::App* add_run_command(CLI::App& app, const std::string& name, const std::string& help, RunFlags& f,
                          bool needs_snapshot) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--config", f.config, "YAML experiment configuration")->required()->check(CLI::ExistingFile);
  auto* snap = sub->add_option("--snapshot", f.snapshot, "snapshot file; {seed} is replaced by each seed");
  if (needs_snapshot) snap->required();
  sub->add_option("--seed", f.seed, "run a single seed");
  sub->add_option("--seeds", f.seeds, "seed list such as 1,2,3 or 1-5");
  sub->add_option("--out", f.out, "output root (default $LVRNN_OUT_ROOT or ./runs)");
  sub->add_option("--family", f.family, "override the posterior family");
  sub->add_flag("--grid", f.grid, "expand the ablation axes of the config (or the full grid)");
  sub->add_option("--jobs", f.jobs, "seeds run concurrently")->check(CLI::PositiveNumber);
  return sub;
}

int run(cli::Command cmd, const RunFlags& f) {
  cli::ExperimentConfig cfg = cli::load_config(f.config);
  if (!f.family.empty()) cli::set_family(cfg, model::family_from_string(f.family));
  if (f.seed) cfg.seeds = {*f.seed};
  if (!f.seeds.empty()) cfg.seeds = parse_seeds(f.seeds);
  cfg.validate();

  cli::RunOptions opts;
  opts.out_root = f.out.empty() ? cli::default_out_root() : fs::path(f.out);
  if (!f.snapshot.empty()) opts.snapshot = f.snapshot;
  opts.jobs = f.jobs;
  if (f.grid) {
    for (const auto& d : cli::run_grid(cmd, cfg, opts)) std::cout << d.string() << '\n';
  } else {
    std::cout << cli::run_experiment(cmd, cfg, opts).string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplace variational recurrent networks for meta-reinforcement learning"};
  app.require_subcommand(1);
  RunFlags train_f, finetune_f, posthoc_f, eval_f;
  auto* train = add_run_command(app, "train", "train from scratch", train_f, false);
  auto* finetune = add_run_command(app, "finetune", "continue training a snapshot under a new posterior", finetune_f, true);
  auto* posthoc = add_run_command(app, "posthoc", "evaluate a Dirac snapshot under a Laplace posterior", posthoc_f, true);
  auto* eval = add_run_command(app, "eval", "evaluate a snapshot", eval_f, true);

  std::vector<std::string> stats_runs;
  std::string stats_out;
  auto* stats = app.add_subcommand("stats", "aggregate runs and draw plots");
  stats->add_option("runs", stats_runs, "run directories or metrics files")->required();
  stats->add_option("--out", stats_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return run(cli::Command::Train, train_f);
    if (*finetune) return run(cli::Command::Finetune, finetune_f);
    if (*posthoc) return run(cli::Command::Posthoc, posthoc_f);
    if (*eval) return run(cli::Command::Eval, eval_f);
    if (*stats) {
      std::vector<fs::path> runs(stats_runs.begin(), stats_runs.end());
      cli::run_stats(runs, stats_out);
      std::cout << (fs::path(stats_out) / "stats.csv").string() << '\n';
      return 0;
    }
  } catch (const model::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return 2;
  } catch (const model::SnapshotError& e) {
    spdlog::error("snapshot error: {}", e.what());
    return 3;
  } catch (const cli::SchemaError& e) {
    spdlog::error("{}", e.what());
    return 4;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
