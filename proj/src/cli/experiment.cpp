#include "lvrnn/cli/experiment.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace lvrnn::cli {

using model::ConfigError;
using model::Family;

namespace {

std::string join(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

void check_keys(const YAML::Node& node, const std::string& section, const std::set<std::string>& allowed) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError(section.empty() ? "config" : section, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(join(section, key), "unknown key");
  }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& field, const char* what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(field, std::string("expected ") + what);
  }
}

std::size_t count(const YAML::Node& n, const std::string& field) {
  const auto v = scalar<long long>(n, field, "a non-negative integer");
  if (v < 0) throw ConfigError(field, "must be non-negative");
  return static_cast<std::size_t>(v);
}

void read(const YAML::Node& sec, const std::string& section, const char* key, std::size_t& out) {
  if (sec && sec[key]) out = count(sec[key], join(section, key));
}
void read(const YAML::Node& sec, const std::string& section, const char* key, double& out) {
  if (sec && sec[key]) out = scalar<double>(sec[key], join(section, key), "a number");
}
void read(const YAML::Node& sec, const std::string& section, const char* key, bool& out) {
  if (sec && sec[key]) out = scalar<bool>(sec[key], join(section, key), "true or false");
}
void read(const YAML::Node& sec, const std::string& section, const char* key, std::vector<std::size_t>& out) {
  if (!sec || !sec[key]) return;
  const std::string field = join(section, key);
  if (!sec[key].IsSequence()) throw ConfigError(field, "expected a list");
  out.clear();
  for (const auto& v : sec[key]) out.push_back(count(v, field));
}
void read(const YAML::Node& sec, const std::string& section, const char* key, std::vector<double>& out) {
  if (!sec || !sec[key]) return;
  const std::string field = join(section, key);
  if (!sec[key].IsSequence()) throw ConfigError(field, "expected a list");
  out.clear();
  for (const auto& v : sec[key]) out.push_back(scalar<double>(v, field, "a number"));
}

template <class T, class F>
void read_list(const YAML::Node& sec, const std::string& section, const char* key, std::vector<T>& out, F parse) {
  if (!sec || !sec[key]) return;
  const std::string field = join(section, key);
  if (!sec[key].IsSequence()) throw ConfigError(field, "expected a list");
  out.clear();
  for (const auto& v : sec[key]) out.push_back(parse(scalar<std::string>(v, field, "a string")));
}

// Shortest representation that parses back to the same double.
std::string number(double v) { return fmt::format("{}", v); }

std::vector<std::string> numbers(const std::vector<double>& v) {
  std::vector<std::string> out;
  for (double x : v) out.push_back(number(x));
  return out;
}

}  // namespace

GridAxes full_grid_axes() {
  GridAxes g;
  g.latent_dim = {32, 64};
  g.covariance = {belief::CovarianceKind::Full, belief::CovarianceKind::Diagonal};
  g.beta = {1.0, 1e-2, 1e-4};
  g.n_z = {1, 5};
  g.history_window = {1, 10};
  g.latent_window = {0, 1};
  g.accumulate = {model::Accumulate::MeanAndPrecision, model::Accumulate::PrecisionOnly};
  return g;
}

void ExperimentConfig::validate() const {
  if (id.empty()) throw ConfigError("experiment", "must not be empty");
  if (id.find('/') != std::string::npos) throw ConfigError("experiment", "must not contain '/'");
  if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (eval.tasks < 1) throw ConfigError("eval.tasks", "must be >= 1");
  if (eval.samples < 1) throw ConfigError("eval.samples", "must be >= 1");
  train.validate();
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config", std::string("not valid YAML: ") + e.what());
  }
  if (!root || root.IsNull()) throw ConfigError("config", "empty configuration");
  check_keys(root, "",
             {"experiment", "domain", "seeds", "model", "posterior", "loss", "ppo", "optimizer", "schedule", "eval",
              "grid"});
  if (!root["domain"]) throw ConfigError("domain", "is required (fourier, bandit or grid)");
  const auto domain_name = scalar<std::string>(root["domain"], "domain", "a string");
  envs::Domain domain;
  try {
    domain = envs::domain_from_string(domain_name);
  } catch (const std::exception&) {
    throw ConfigError("domain", "unknown domain '" + domain_name + "' (expected fourier, bandit or grid)");
  }

  const YAML::Node post = root["posterior"];
  check_keys(post, "posterior", {"family", "covariance", "accumulate", "history_window", "latent_window"});
  Family family = Family::Dirac;
  if (post && post["family"])
    family = model::family_from_string(scalar<std::string>(post["family"], "posterior.family", "a string"));
  std::optional<belief::CovarianceKind> cov;
  if (post && post["covariance"]) {
    const auto s = scalar<std::string>(post["covariance"], "posterior.covariance", "a string");
    try {
      cov = belief::covariance_kind_from_string(s);
    } catch (const std::exception&) {
      throw ConfigError("posterior.covariance", "unknown covariance '" + s + "' (expected full or diagonal)");
    }
  }

  ExperimentConfig cfg;
  cfg.train = train::desk_config(domain, model::PosteriorConfig::preset(family, cov));
  if (family == Family::Dirac && cov) cfg.train.posterior.covariance = cov;  // rejected by validate()
  cfg.id = envs::to_string(domain) + "-" + model::to_string(family);
  if (root["experiment"]) cfg.id = scalar<std::string>(root["experiment"], "experiment", "a string");

  if (post && post["accumulate"])
    cfg.train.posterior.accumulate =
        model::accumulate_from_string(scalar<std::string>(post["accumulate"], "posterior.accumulate", "a string"));
  read(post, "posterior", "history_window", cfg.train.posterior.history_window);
  read(post, "posterior", "latent_window", cfg.train.posterior.latent_window);

  if (root["seeds"]) {
    const YAML::Node s = root["seeds"];
    cfg.seeds.clear();
    if (s.IsSequence()) {
      for (const auto& v : s) cfg.seeds.push_back(scalar<std::uint64_t>(v, "seeds", "a list of integers"));
    } else {
      cfg.seeds.push_back(scalar<std::uint64_t>(s, "seeds", "an integer or a list of integers"));
    }
  }

  auto& a = cfg.train.architecture;
  const YAML::Node m = root["model"];
  check_keys(m, "model", {"embed_hidden", "lstm_hidden", "latent_dim", "head_hidden", "leaky_slope", "policy_uses_state"});
  read(m, "model", "embed_hidden", a.embed_hidden);
  read(m, "model", "lstm_hidden", a.lstm_hidden);
  read(m, "model", "latent_dim", a.latent_dim);
  read(m, "model", "head_hidden", a.head_hidden);
  read(m, "model", "leaky_slope", a.leaky_slope);
  read(m, "model", "policy_uses_state", a.policy_uses_state);

  const YAML::Node l = root["loss"];
  check_keys(l, "loss", {"beta", "n_z"});
  read(l, "loss", "beta", cfg.train.loss.beta);
  read(l, "loss", "n_z", cfg.train.loss.n_z);

  auto& p = cfg.train.ppo;
  const YAML::Node pp = root["ppo"];
  check_keys(pp, "ppo",
             {"gae_lambda", "clip", "value_scale", "policy_scale", "entropy_scale", "epochs", "standardize_advantages"});
  read(pp, "ppo", "gae_lambda", p.gae_lambda);
  read(pp, "ppo", "clip", p.clip);
  read(pp, "ppo", "value_scale", p.value_scale);
  read(pp, "ppo", "policy_scale", p.policy_scale);
  read(pp, "ppo", "entropy_scale", p.entropy_scale);
  read(pp, "ppo", "epochs", p.epochs);
  read(pp, "ppo", "standardize_advantages", p.standardize_advantages);

  auto& o = cfg.train.optimizer;
  const YAML::Node op = root["optimizer"];
  check_keys(op, "optimizer",
             {"learning_rate", "weight_decay", "beta1", "beta2", "epsilon", "max_global_norm", "element_clip"});
  read(op, "optimizer", "learning_rate", o.learning_rate);
  read(op, "optimizer", "weight_decay", o.weight_decay);
  read(op, "optimizer", "beta1", o.beta1);
  read(op, "optimizer", "beta2", o.beta2);
  read(op, "optimizer", "epsilon", o.epsilon);
  read(op, "optimizer", "max_global_norm", o.max_global_norm);
  read(op, "optimizer", "element_clip", o.element_clip);

  auto& sc = cfg.train.schedule;
  const YAML::Node s = root["schedule"];
  check_keys(s, "schedule", {"updates", "batch", "horizon", "snapshot_fractions"});
  read(s, "schedule", "updates", sc.updates);
  read(s, "schedule", "batch", sc.batch);
  read(s, "schedule", "horizon", sc.horizon);
  read(s, "schedule", "snapshot_fractions", sc.snapshot_fractions);

  const YAML::Node e = root["eval"];
  check_keys(e, "eval", {"tasks", "samples", "act_at_mean", "greedy"});
  read(e, "eval", "tasks", cfg.eval.tasks);
  read(e, "eval", "samples", cfg.eval.samples);
  read(e, "eval", "act_at_mean", cfg.eval.act_at_mean);
  read(e, "eval", "greedy", cfg.eval.greedy);

  if (const YAML::Node g = root["grid"]) {
    check_keys(g, "grid",
               {"latent_dim", "covariance", "beta", "n_z", "history_window", "latent_window", "accumulate"});
    GridAxes axes;
    read(g, "grid", "latent_dim", axes.latent_dim);
    read_list(g, "grid", "covariance", axes.covariance, [](const std::string& v) {
      try {
        return belief::covariance_kind_from_string(v);
      } catch (const std::exception&) {
        throw ConfigError("grid.covariance", "unknown covariance '" + v + "'");
      }
    });
    read(g, "grid", "beta", axes.beta);
    read(g, "grid", "n_z", axes.n_z);
    read(g, "grid", "history_window", axes.history_window);
    read(g, "grid", "latent_window", axes.latent_window);
    read_list(g, "grid", "accumulate", axes.accumulate, model::accumulate_from_string);
    cfg.grid = axes;
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string resolved_config(const ExperimentConfig& cfg) {
  const auto& t = cfg.train;
  YAML::Emitter y;
  y << YAML::BeginMap;
  y << YAML::Key << "experiment" << YAML::Value << cfg.id;
  y << YAML::Key << "domain" << YAML::Value << envs::to_string(t.domain);
  y << YAML::Key << "seeds" << YAML::Value << YAML::Flow << cfg.seeds;

  y << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "embed_hidden" << YAML::Value << YAML::Flow << t.architecture.embed_hidden;
  y << YAML::Key << "lstm_hidden" << YAML::Value << t.architecture.lstm_hidden;
  y << YAML::Key << "latent_dim" << YAML::Value << t.architecture.latent_dim;
  y << YAML::Key << "head_hidden" << YAML::Value << YAML::Flow << t.architecture.head_hidden;
  y << YAML::Key << "leaky_slope" << YAML::Value << number(t.architecture.leaky_slope);
  y << YAML::Key << "policy_uses_state" << YAML::Value << t.architecture.policy_uses_state;
  y << YAML::EndMap;

  y << YAML::Key << "posterior" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "family" << YAML::Value << model::to_string(t.posterior.family);
  if (t.posterior.covariance)
    y << YAML::Key << "covariance" << YAML::Value << belief::to_string(*t.posterior.covariance);
  y << YAML::Key << "accumulate" << YAML::Value << model::to_string(t.posterior.accumulate);
  y << YAML::Key << "history_window" << YAML::Value << t.posterior.history_window;
  y << YAML::Key << "latent_window" << YAML::Value << t.posterior.latent_window;
  y << YAML::EndMap;

  y << YAML::Key << "loss" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "beta" << YAML::Value << number(t.loss.beta);
  y << YAML::Key << "n_z" << YAML::Value << t.loss.n_z;
  y << YAML::EndMap;

  y << YAML::Key << "ppo" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "gae_lambda" << YAML::Value << number(t.ppo.gae_lambda);
  y << YAML::Key << "clip" << YAML::Value << number(t.ppo.clip);
  y << YAML::Key << "value_scale" << YAML::Value << number(t.ppo.value_scale);
  y << YAML::Key << "policy_scale" << YAML::Value << number(t.ppo.policy_scale);
  y << YAML::Key << "entropy_scale" << YAML::Value << number(t.ppo.entropy_scale);
  y << YAML::Key << "epochs" << YAML::Value << t.ppo.epochs;
  y << YAML::Key << "standardize_advantages" << YAML::Value << t.ppo.standardize_advantages;
  y << YAML::EndMap;

  y << YAML::Key << "optimizer" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "learning_rate" << YAML::Value << number(t.optimizer.learning_rate);
  y << YAML::Key << "weight_decay" << YAML::Value << number(t.optimizer.weight_decay);
  y << YAML::Key << "beta1" << YAML::Value << number(t.optimizer.beta1);
  y << YAML::Key << "beta2" << YAML::Value << number(t.optimizer.beta2);
  y << YAML::Key << "epsilon" << YAML::Value << number(t.optimizer.epsilon);
  y << YAML::Key << "max_global_norm" << YAML::Value << number(t.optimizer.max_global_norm);
  y << YAML::Key << "element_clip" << YAML::Value << number(t.optimizer.element_clip);
  y << YAML::EndMap;

  y << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "updates" << YAML::Value << t.schedule.updates;
  y << YAML::Key << "batch" << YAML::Value << t.schedule.batch;
  y << YAML::Key << "horizon" << YAML::Value << t.horizon();
  y << YAML::Key << "snapshot_fractions" << YAML::Value << YAML::Flow << numbers(t.schedule.snapshot_fractions);
  y << YAML::EndMap;

  y << YAML::Key << "eval" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "tasks" << YAML::Value << cfg.eval.tasks;
  y << YAML::Key << "samples" << YAML::Value << cfg.eval.samples;
  y << YAML::Key << "act_at_mean" << YAML::Value << cfg.eval.act_at_mean;
  y << YAML::Key << "greedy" << YAML::Value << cfg.eval.greedy;
  y << YAML::EndMap;
  y << YAML::EndMap;
  return std::string(y.c_str()) + "\n";
}

void set_family(ExperimentConfig& cfg, Family family) {
  const auto cov = cfg.train.posterior.covariance;
  cfg.train.posterior = model::PosteriorConfig::preset(family, family == Family::Dirac ? std::nullopt : cov);
}

GridExpansion expand_grid(const ExperimentConfig& base, const GridAxes& axes) {
  const Family f = base.train.posterior.family;
  const bool gaussian = f != Family::Dirac;
  const bool windowed = f == Family::LaplaceWindowed;
  const bool accumulating = f == Family::LaplaceMarkov || windowed;

  struct Axis {
    std::string tag;
    std::size_t size;
    std::function<void(ExperimentConfig&, std::size_t)> apply;
    std::function<std::string(std::size_t)> label;
  };
  std::vector<Axis> active;
  GridExpansion out;
  auto add = [&](bool applies, const char* name, const char* tag, const auto& values, auto apply, auto label) {
    if (values.empty()) return;
    if (!applies) {
      out.skipped.push_back(fmt::format("axis {} does not apply to {} and is not expanded", name, model::to_string(f)));
      return;
    }
    active.push_back({tag, values.size(), [=](ExperimentConfig& c, std::size_t i) { apply(c, values[i]); },
                      [=](std::size_t i) { return label(values[i]); }});
  };
  auto str = [](auto v) { return fmt::format("{}", v); };
  add(true, "latent_dim", "ld", axes.latent_dim, [](ExperimentConfig& c, std::size_t v) { c.train.architecture.latent_dim = v; }, str);
  add(gaussian, "covariance", "cov", axes.covariance,
      [](ExperimentConfig& c, belief::CovarianceKind v) { c.train.posterior.covariance = v; },
      [](belief::CovarianceKind v) { return belief::to_string(v); });
  add(gaussian, "beta", "beta", axes.beta, [](ExperimentConfig& c, double v) { c.train.loss.beta = v; }, number);
  add(gaussian, "n_z", "nz", axes.n_z, [](ExperimentConfig& c, std::size_t v) { c.train.loss.n_z = v; }, str);
  add(windowed, "history_window", "kh", axes.history_window,
      [](ExperimentConfig& c, std::size_t v) { c.train.posterior.history_window = v; }, str);
  add(windowed, "latent_window", "kz", axes.latent_window,
      [](ExperimentConfig& c, std::size_t v) { c.train.posterior.latent_window = v; }, str);
  add(accumulating, "accumulate", "acc", axes.accumulate,
      [](ExperimentConfig& c, model::Accumulate v) { c.train.posterior.accumulate = v; },
      [](model::Accumulate v) { return model::to_string(v); });

  std::vector<std::size_t> idx(active.size(), 0);
  for (;;) {
    ExperimentConfig c = base;
    c.grid.reset();
    std::string suffix;
    for (std::size_t k = 0; k < active.size(); ++k) {
      active[k].apply(c, idx[k]);
      suffix += "." + active[k].tag + active[k].label(idx[k]);
    }
    c.id = base.id + suffix;
    try {
      c.validate();
      out.configs.push_back(std::move(c));
    } catch (const ConfigError& e) {
      out.skipped.push_back(c.id + ": " + e.what());
    }
    std::size_t k = 0;
    while (k < active.size() && ++idx[k] == active[k].size) idx[k++] = 0;
    if (k == active.size()) break;
  }
  return out;
}

}  // namespace lvrnn::cli
