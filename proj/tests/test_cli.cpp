#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "lvrnn/cli/commands.hpp"
#include "lvrnn/model/snapshot.hpp"

using namespace lvrnn;
using namespace lvrnn::cli;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(
experiment: tiny
domain: bandit
seeds: [3, 4]
model: {embed_hidden: [6], lstm_hidden: 8, latent_dim: 3, head_hidden: [6]}
posterior: {family: dirac}
schedule: {updates: 3, batch: 3, snapshot_fractions: [0.5]}
eval: {tasks: 3, act_at_mean: true}
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("lvrnn_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string field_of(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const model::ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

// ---------------------------------------------------------------- configuration

TEST(Config, DomainHorizonsAreResolved) {
  const auto grid = parse_config("domain: grid\n");
  EXPECT_EQ(grid.train.horizon(), 100u);
  EXPECT_NE(resolved_config(grid).find("horizon: 100"), std::string::npos);
  const auto bandit = parse_config("domain: bandit\n");
  EXPECT_EQ(bandit.train.horizon(), 50u);
  EXPECT_NE(resolved_config(bandit).find("horizon: 50"), std::string::npos);
  EXPECT_EQ(grid.id, "grid-dirac");
}

TEST(Config, ResolvedConfigRoundTrips) {
  const auto cfg = parse_config(std::string(kTiny) + "loss: {beta: 0.0001}\n");
  const std::string text = resolved_config(cfg);
  const auto back = parse_config(text);
  EXPECT_EQ(resolved_config(back), text);
  EXPECT_EQ(back.seeds, cfg.seeds);
  EXPECT_EQ(back.train.architecture, cfg.train.architecture);
  EXPECT_EQ(back.train.posterior, cfg.train.posterior);
  EXPECT_EQ(back.train.loss.beta, 1e-4);
  EXPECT_EQ(back.eval, cfg.eval);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(field_of("experiment: x\n"), "domain");
  EXPECT_EQ(field_of("domain: moon\n"), "domain");
  EXPECT_EQ(field_of("domain: grid\nschedule: {updtes: 3}\n"), "schedule.updtes");
  EXPECT_EQ(field_of("domain: grid\nschedule: {batch: many}\n"), "schedule.batch");
  EXPECT_EQ(field_of("domain: grid\nschedule: {batch: 0}\n"), "schedule.batch");
  EXPECT_EQ(field_of("domain: grid\nposterior: {family: dirac, covariance: full}\n"), "posterior.covariance");
  EXPECT_EQ(field_of("domain: grid\nposterior: {family: laplace_markov, history_window: 10}\n"),
            "posterior.history_window");
  EXPECT_EQ(field_of("domain: grid\nposterior: {family: laplace_windowed, latent_window: 0, "
                     "accumulate: mean_and_precision}\n"),
            "posterior.accumulate");
  EXPECT_EQ(field_of("domain: grid\nposterior: {family: gp}\n"), "posterior.family");
  EXPECT_EQ(field_of("domain: grid\nseeds: []\n"), "seeds");
  EXPECT_EQ(field_of("[1, 2\n"), "config");
  EXPECT_EQ(field_of("- domain\n"), "config");
}

TEST(Config, GridEnumeratesExactlyTheValidCombinations) {
  auto cfg = parse_config("domain: bandit\nposterior: {family: laplace_windowed, covariance: full}\n");
  const auto g = expand_grid(cfg, full_grid_axes());
  // 2 latent dims × 2 covariances × 3 β × 2 n_Z × 2 k_H × 3 valid (k_Z, accumulate) pairs.
  EXPECT_EQ(g.configs.size(), 144u);
  EXPECT_EQ(g.skipped.size(), 48u);
  for (const auto& s : g.skipped) EXPECT_NE(s.find("posterior.accumulate"), std::string::npos) << s;
  std::set<std::string> ids;
  for (const auto& c : g.configs) {
    ids.insert(c.id);
    EXPECT_NO_THROW(c.validate());
  }
  EXPECT_EQ(ids.size(), g.configs.size());

  const auto markov = expand_grid(parse_config("domain: bandit\nposterior: {family: laplace_markov, covariance: full}\n"),
                                  full_grid_axes());
  EXPECT_EQ(markov.configs.size(), 48u);
  const auto dirac = expand_grid(parse_config("domain: grid\n"), full_grid_axes());
  EXPECT_EQ(dirac.configs.size(), 2u);
  EXPECT_EQ(dirac.skipped.size(), 6u);
}

TEST(Config, FamilyOverrideKeepsCovariance) {
  auto cfg = parse_config("domain: grid\nposterior: {family: laplace_markov, covariance: diagonal}\n");
  set_family(cfg, model::Family::LaplaceStationary);
  EXPECT_EQ(cfg.train.posterior.covariance, belief::CovarianceKind::Diagonal);
  set_family(cfg, model::Family::Dirac);
  EXPECT_NO_THROW(cfg.validate());
}

// ---------------------------------------------------------------- metrics files

TEST(Metrics, RowsRoundTripExactly) {
  const MetricsRow r{"e", "7", "eval", 12, "entropy", 0.1 + 0.2, -1e-300, std::nan("")};
  const MetricsRow back = parse_row(format_row(r));
  EXPECT_EQ(back.value, r.value);
  EXPECT_EQ(back.ci_lo, r.ci_lo);
  EXPECT_TRUE(std::isnan(back.ci_hi));
  EXPECT_THROW(parse_row("a,b,c"), SchemaError);
  EXPECT_THROW(parse_row("e,1,eval,x,m,1,1,1"), SchemaError);
}

TEST(Metrics, HeaderIsMandatory) {
  const fs::path d = fresh_dir("header");
  std::ofstream(d / "m.csv") << "seed,value\n1,2\n";
  EXPECT_THROW(read_metrics(d / "m.csv"), SchemaError);
  write_metrics(d / "ok.csv", {point_row("e", "1", "train", 1, "loss", 2.5)});
  EXPECT_EQ(slurp(d / "ok.csv"), std::string(kMetricsHeader) + "\ne,1,train,1,loss,2.5,2.5,2.5\n");
}

// ---------------------------------------------------------------- stats and plots

TEST(Stats, SingleRunHasDegenerateBand) {
  const auto agg = aggregate_rows({point_row("e", "1", "train", 1, "loss", 2.0)});
  ASSERT_EQ(agg.size(), 1u);
  EXPECT_EQ(agg[0].seed, "all");
  EXPECT_EQ(agg[0].value, 2.0);
  EXPECT_EQ(agg[0].ci_lo, 2.0);
  EXPECT_EQ(agg[0].ci_hi, 2.0);
}

TEST(Stats, IdenticalRunsAggregateToThemselves) {
  const fs::path d = fresh_dir("identical");
  std::vector<MetricsRow> rows;
  for (std::size_t t = 1; t <= 5; ++t) rows.push_back(point_row("e", "1", "eval", t, "entropy", 3.0 - 0.1 * t));
  write_metrics(d / "a.csv", rows);
  write_metrics(d / "b.csv", rows);
  const auto agg = run_stats({d / "a.csv", d / "b.csv"}, d / "out");
  ASSERT_EQ(agg.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(agg[i].value, rows[i].value);
    EXPECT_EQ(agg[i].ci_lo, rows[i].value);
    EXPECT_EQ(agg[i].ci_hi, rows[i].value);
  }
  EXPECT_TRUE(fs::exists(d / "out" / "stats.csv"));
  EXPECT_TRUE(fs::exists(d / "out" / "plots" / "entropy.svg"));
}

TEST(Stats, SchemaMismatchListsEveryOffendingFile) {
  const fs::path d = fresh_dir("schema");
  write_metrics(d / "good.csv", {point_row("e", "1", "train", 1, "loss", 1.0)});
  std::ofstream(d / "bad1.csv") << "a,b\n";
  std::ofstream(d / "bad2.csv") << std::string(kMetricsHeader) << "\ne,1,train\n";
  try {
    run_stats({d / "good.csv", d / "bad1.csv", d / "bad2.csv"}, d / "out");
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bad1.csv"), std::string::npos);
    EXPECT_NE(msg.find("bad2.csv"), std::string::npos);
    EXPECT_EQ(msg.find("good.csv"), std::string::npos);
  }
}

TEST(Plot, AxesCoverDataWithFivePercentMargin) {
  Series s{"run", {1, 2, 3, 4}, {0.5, 2.0, -1.0, 1.0}, {0.0, 1.5, -2.0, 0.5}, {1.0, 2.5, 0.0, 3.0}};
  const PlotFrame f;
  const std::string svg = render_svg("t", "x", "y", {s}, f);

  std::smatch m;
  ASSERT_TRUE(std::regex_search(svg, m, std::regex("data-extents=\"([^ ]+) ([^ ]+) ([^ ]+) ([^\"]+)\"")));
  const double xmin = std::stod(m[1]), xmax = std::stod(m[2]), ymin = std::stod(m[3]), ymax = std::stod(m[4]);
  EXPECT_NEAR(xmin, 1.0 - 0.05 * 3.0, 1e-12);
  EXPECT_NEAR(xmax, 4.0 + 0.05 * 3.0, 1e-12);
  EXPECT_NEAR(ymin, -2.0 - 0.05 * 5.0, 1e-12);
  EXPECT_NEAR(ymax, 3.0 + 0.05 * 5.0, 1e-12);

  // Every emitted coordinate lies inside the frame, and the extreme data
  // points sit exactly 5/110 of the frame inside its edges.
  double pxmin = 1e9, pxmax = -1e9, pymin = 1e9, pymax = -1e9;
  const std::regex shape("<(polyline|polygon) class=\"(mean|band)\" points=\"([^\"]*)\"");
  const std::regex point("([-0-9.]+),([-0-9.]+)");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), shape); it != std::sregex_iterator(); ++it) {
    const std::string pts = (*it)[3];
    for (auto p = std::sregex_iterator(pts.begin(), pts.end(), point); p != std::sregex_iterator(); ++p) {
      const double x = std::stod((*p)[1]), y = std::stod((*p)[2]);
      pxmin = std::min(pxmin, x), pxmax = std::max(pxmax, x);
      pymin = std::min(pymin, y), pymax = std::max(pymax, y);
    }
  }
  const double inset = 0.05 / 1.1;
  EXPECT_NEAR(pxmin, f.left + inset * f.width, 1e-3);
  EXPECT_NEAR(pxmax, f.left + (1 - inset) * f.width, 1e-3);
  EXPECT_NEAR(pymin, f.top + inset * f.height, 1e-3);
  EXPECT_NEAR(pymax, f.top + (1 - inset) * f.height, 1e-3);
}

TEST(Plot, ConstantSeriesStillHasExtent) {
  const Extents e = plot_extents({Series{"c", {1, 1}, {2, 2}, {2, 2}, {2, 2}}});
  EXPECT_LT(e.xmin, 1.0);
  EXPECT_GT(e.xmax, 1.0);
  EXPECT_LT(e.ymin, 2.0);
  EXPECT_GT(e.ymax, 2.0);
}

// ---------------------------------------------------------------- commands

TEST(Commands, SameConfigAndSeedGiveIdenticalMetrics) {
  const auto cfg = parse_config(kTiny);
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  RunOptions oa{a, std::nullopt, 1}, ob{b, std::nullopt, 2};
  const fs::path ra = run_experiment(Command::Train, cfg, oa), rb = run_experiment(Command::Train, cfg, ob);
  EXPECT_EQ(slurp(ra / "metrics.csv"), slurp(rb / "metrics.csv"));
  EXPECT_EQ(slurp(ra / "config.resolved"), slurp(rb / "config.resolved"));
  EXPECT_EQ(slurp(ra / "snapshots" / "seed-3" / "final.lvrnn"), slurp(rb / "snapshots" / "seed-3" / "final.lvrnn"));
  for (const char* f : {"config.resolved", "metrics.csv", "manifest.json"}) EXPECT_TRUE(fs::exists(ra / f)) << f;
  EXPECT_TRUE(fs::exists(ra / "snapshots" / "seed-4" / "step-2.lvrnn"));
  EXPECT_TRUE(fs::is_directory(ra / "plots"));
  // The run re-runs from its own resolved config.
  const fs::path c = fresh_dir("det_c");
  const fs::path rc = run_experiment(Command::Train, load_config(ra / "config.resolved"), {c, std::nullopt, 1});
  EXPECT_EQ(slurp(ra / "metrics.csv"), slurp(rc / "metrics.csv"));
}

TEST(Commands, PosthocAtTheMeanReproducesDiracReturns) {
  const auto cfg = parse_config(kTiny);
  const fs::path d = fresh_dir("posthoc");
  const fs::path trained = run_experiment(Command::Train, cfg, {d, std::nullopt, 1});

  auto post = parse_config(std::string(kTiny) + "");
  post.id = "tiny-posthoc";
  set_family(post, model::Family::LaplaceMarkov);
  post.train.posterior.covariance = belief::CovarianceKind::Full;
  const fs::path pattern = trained / "snapshots" / "seed-{seed}" / "final.lvrnn";
  const fs::path ph = run_experiment(Command::Posthoc, post, {d, pattern, 1});

  const auto dirac = read_metrics(trained / "metrics.csv");
  const auto laplace = read_metrics(ph / "metrics.csv");
  auto eval_return = [](const std::vector<MetricsRow>& rows, const std::string& seed) {
    for (const auto& r : rows)
      if (r.phase == "eval" && r.metric == "return" && r.seed == seed) return r.value;
    return std::nan("");
  };
  for (const char* seed : {"3", "4"}) EXPECT_EQ(eval_return(dirac, seed), eval_return(laplace, seed));

  std::set<std::size_t> entropy_steps, kl_steps;
  for (const auto& r : laplace) {
    EXPECT_NE(r.phase, "train");
    if (r.metric == "entropy" && r.seed == "3") entropy_steps.insert(r.step);
    if (r.metric == "consecutive_kl" && r.seed == "3") kl_steps.insert(r.step);
  }
  EXPECT_EQ(entropy_steps.size(), 49u);
  EXPECT_EQ(*entropy_steps.begin(), 2u);
  EXPECT_EQ(*entropy_steps.rbegin(), 50u);
  EXPECT_EQ(kl_steps, entropy_steps);

  const std::string first = slurp(ph / "metrics.csv");
  run_experiment(Command::Posthoc, post, {d, pattern, 1});
  EXPECT_EQ(slurp(ph / "metrics.csv"), first);
}

TEST(Commands, PosthocRejectsVrnnAndNonDiracSnapshots) {
  const fs::path d = fresh_dir("reject");
  auto cfg = parse_config(kTiny);
  set_family(cfg, model::Family::VRNN);
  cfg.train.posterior.covariance = belief::CovarianceKind::Full;
  EXPECT_THROW(run_experiment(Command::Posthoc, cfg, {d, d / "x.lvrnn", 1}), model::ConfigError);

  cfg.id = "vrnn";
  const fs::path trained = run_experiment(Command::Train, cfg, {d, std::nullopt, 1});
  auto post = cfg;
  post.id = "post";
  set_family(post, model::Family::LaplaceMarkov);
  EXPECT_THROW(run_experiment(Command::Posthoc, post, {d, trained / "snapshots/seed-{seed}/final.lvrnn", 1}),
               model::ConfigError);
  EXPECT_THROW(run_experiment(Command::Eval, post, {d, d / "missing-{seed}.lvrnn", 1}), model::SnapshotError);
}

TEST(Commands, SnapshotPatternAndOutputRoot) {
  EXPECT_EQ(snapshot_for_seed("runs/x/seed-{seed}/final.lvrnn", 12), fs::path("runs/x/seed-12/final.lvrnn"));
  ::setenv("LVRNN_OUT_ROOT", "/tmp/elsewhere", 1);
  EXPECT_EQ(default_out_root(), fs::path("/tmp/elsewhere"));
  ::unsetenv("LVRNN_OUT_ROOT");
  EXPECT_EQ(default_out_root(), fs::path("runs"));
}
