#include "lvrnn/model/params.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace lvrnn::model {

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const Tensor& t : values) n += t.size();
  return n;
}

std::size_t ParamSet::index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

bool ParamSet::contains(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

bool ParamSet::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](const Tensor& t) { return t.all_finite(); });
}

std::size_t posterior_head_width(std::size_t n, CovarianceKind kind) {
  return kind == CovarianceKind::Full ? 2 * n + n * (n - 1) / 2 : 2 * n;
}

namespace {

void mlp(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t in, const std::vector<std::size_t>& widths) {
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::string p = prefix + "." + std::to_string(l);
    out.push_back({p + ".w", {in, widths[l]}, in});
    out.push_back({p + ".b", {widths[l]}, in});
    in = widths[l];
  }
}

}  // namespace

std::vector<ParamSpec> param_layout(const Architecture& arch, std::optional<CovarianceKind> vrnn_kind) {
  arch.validate();
  std::vector<ParamSpec> out;
  mlp(out, "state_embed", arch.observation_dim, arch.embed_hidden);
  if (arch.num_actions > 0) mlp(out, "action_embed", arch.num_actions, arch.embed_hidden);
  mlp(out, "reward_embed", 1, arch.embed_hidden);

  const std::size_t in = arch.input_dim();
  const std::size_t h = arch.lstm_hidden;
  const std::size_t n = arch.latent_dim;
  out.push_back({"lstm.w", {in, 4 * h}, in + n});
  out.push_back({"lstm.u", {n, 4 * h}, in + n});
  out.push_back({"lstm.b", {4 * h}, in + n});
  out.push_back({"project.w", {h, n}, h});
  out.push_back({"project.b", {n}, h});

  const bool policy = arch.head == HeadKind::Policy;
  const std::string head = policy ? "policy_head" : "reward_head";
  const std::size_t head_in = n + (policy && !arch.policy_uses_state ? 0 : arch.embed_dim());
  mlp(out, head, head_in, arch.head_hidden);
  // Policy: logits + value. Regression: mean + log-variance.
  const std::size_t head_out = policy ? arch.num_actions + 1 : 2;
  out.push_back({head + ".out.w", {arch.head_hidden.back(), head_out}, arch.head_hidden.back()});
  out.push_back({head + ".out.b", {head_out}, arch.head_hidden.back()});

  if (vrnn_kind) {
    const std::size_t w = posterior_head_width(n, *vrnn_kind);
    out.push_back({"posterior_head.w", {n, w}, n});
    out.push_back({"posterior_head.b", {w}, n});
  }
  return out;
}

ParamSet init_params(const std::vector<ParamSpec>& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamSet ps;
  for (const ParamSpec& spec : layout) {
    const double a = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
    std::uniform_real_distribution<double> u(-a, a);
    Tensor t(spec.shape);
    for (double& v : t.data()) v = u(rng);
    ps.names.push_back(spec.name);
    ps.values.push_back(std::move(t));
  }
  return ps;
}

}  // namespace lvrnn::model
