#include "lvrnn/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "lvrnn/num/linalg.hpp"

namespace lvrnn::model {

using num::ContractError;
using num::DimensionError;
using num::RowMatrix;

namespace {

Tensor row(const Tensor& m, std::size_t b) {
  const std::size_t c = m.dim(1);
  return Tensor({c}, std::vector<double>(m.data().begin() + static_cast<std::ptrdiff_t>(b * c),
                                         m.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * c)));
}

Tensor stack_rows(const std::vector<Tensor>& rows, std::size_t cols) {
  Tensor m({rows.size(), cols});
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (rows[b].size() != cols) throw DimensionError("stack_rows", rows[b].shape(), {cols});
    std::copy(rows[b].data().begin(), rows[b].data().end(), m.data().begin() + static_cast<std::ptrdiff_t>(b * cols));
  }
  return m;
}

// Maps the strictly lower triangle (row-major enumeration) to the dense
// skew-symmetric matrix L - L^T, flattened.
Tensor skew_basis(std::size_t n) {
  Tensor k({n * (n - 1) / 2, n * n});
  std::size_t r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j, ++r) {
      k(r, i * n + j) = 1.0;
      k(r, j * n + i) = -1.0;
    }
  }
  return k;
}

Tensor batch_identity(std::size_t batch, std::size_t n) {
  Tensor t({batch, n, n});
  for (std::size_t b = 0; b < batch; ++b) t.slice(b).setIdentity();
  return t;
}

double logdet_precision(const PrecisionMatrix& p) {
  if (p.kind() == CovarianceKind::Diagonal) return p.values().vec().array().log().sum();
  return num::log_det_spd(p.values());
}

}  // namespace

// ---------------------------------------------------------------- Model

Model::Model(Architecture arch, PosteriorConfig posterior, std::uint64_t seed)
    : arch_(std::move(arch)), posterior_(std::move(posterior)) {
  posterior_.validate();
  const auto layout = param_layout(arch_, is_vrnn() ? posterior_.covariance : std::nullopt);
  params_ = init_params(layout, seed);
  bind();
}

Model::Model(Architecture arch, PosteriorConfig posterior, ParamSet params)
    : arch_(std::move(arch)), posterior_(std::move(posterior)), params_(std::move(params)) {
  posterior_.validate();
  const auto layout = param_layout(arch_, is_vrnn() ? posterior_.covariance : std::nullopt);
  if (layout.size() != params_.size())
    throw DimensionError("parameter count: expected " + std::to_string(layout.size()) + " tensors, got " +
                         std::to_string(params_.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].name != params_.names[i])
      throw DimensionError("parameter " + std::to_string(i) + ": expected '" + layout[i].name + "', got '" +
                           params_.names[i] + "'");
    if (layout[i].shape != params_.values[i].shape())
      throw DimensionError("parameter " + layout[i].name, layout[i].shape, params_.values[i].shape());
  }
  bind();
}

void Model::bind() {
  auto layers = [&](const std::string& prefix, std::size_t count) {
    std::vector<Layer> out;
    for (std::size_t l = 0; l < count; ++l) {
      const std::string p = prefix + "." + std::to_string(l);
      out.push_back({params_.index(p + ".w"), params_.index(p + ".b")});
    }
    return out;
  };
  idx_.state_embed = layers("state_embed", arch_.embed_hidden.size());
  if (arch_.num_actions > 0) idx_.action_embed = layers("action_embed", arch_.embed_hidden.size());
  idx_.reward_embed = layers("reward_embed", arch_.embed_hidden.size());
  idx_.lstm_w = params_.index("lstm.w");
  idx_.lstm_u = params_.index("lstm.u");
  idx_.lstm_b = params_.index("lstm.b");
  idx_.project_w = params_.index("project.w");
  idx_.project_b = params_.index("project.b");
  const std::string head = arch_.head == HeadKind::Policy ? "policy_head" : "reward_head";
  idx_.head = layers(head, arch_.head_hidden.size());
  idx_.head_out = {params_.index(head + ".out.w"), params_.index(head + ".out.b")};
  if (is_vrnn()) idx_.posterior_head = Layer{params_.index("posterior_head.w"), params_.index("posterior_head.b")};
}

LstmWeights Model::lstm_weights() const {
  return {params_.values[idx_.lstm_w], params_.values[idx_.lstm_u], params_.values[idx_.lstm_b]};
}

PosteriorState initial_state(const Model& model) {
  const std::size_t n = model.latent_dim();
  const std::size_t h = model.architecture().lstm_hidden;
  PosteriorState s;
  s.phi = Tensor({n});
  s.hidden = Tensor({h});
  s.cell = Tensor({h});
  s.accum_mean = Tensor({n});
  s.accum_precision = PrecisionMatrix::zeros(n, model.posterior().covariance_or_default());
  return s;
}

Tensor state_jacobian(const Model& model, const Tensor& embedded_input, const Tensor& phi, const Tensor& cell) {
  return lstm_state_jacobian(model.lstm_weights(), model.param("project.w"), embedded_input, phi, cell);
}

// ---------------------------------------------------------------- Recurrence

Recurrence::Recurrence(const Model& model, num::Tape& tape, std::size_t batch, PrecisionCache* cache)
    : model_(model), tape_(&tape), batch_(batch), cache_(cache) {
  if (batch == 0) throw ContractError("Recurrence: batch must be >= 1");
  std::vector<PosteriorState> init(batch, initial_state(model));
  const std::size_t n = model.latent_dim();
  bind_params();
  phi_ = tape_->constant(Tensor({batch, n}));
  hidden_ = tape_->constant(Tensor({batch, model.architecture().lstm_hidden}));
  cell_ = tape_->constant(Tensor({batch, model.architecture().lstm_hidden}));
  accum_mean_.assign(batch, init[0].accum_mean);
  accum_precision_.assign(batch, init[0].accum_precision);
  history_.assign(batch, {});
  // The belief before any input is the prior N(0, I / prior_precision).
  mean_ = phi_;
  const auto& post = model.posterior();
  if (is_laplace(post.family)) {
    precision_.assign(batch, belief::prior_belief(Tensor({n}), post.covariance_or_default()).precision);
  } else if (post.family == Family::VRNN) {
    log_eigs_ = tape_->constant(Tensor::filled({batch, n}, -std::log(belief::kPriorPrecision)));
    if (post.covariance_or_default() == CovarianceKind::Full) rotation_ = tape_->constant(batch_identity(batch, n));
  }
}

Recurrence::Recurrence(const Model& model, num::Tape& tape, std::span<const PosteriorState> states)
    : model_(model), tape_(&tape), batch_(states.size()), cache_(nullptr) {
  if (states.empty()) throw ContractError("Recurrence: batch must be >= 1");
  const std::size_t n = model.latent_dim();
  const std::size_t h = model.architecture().lstm_hidden;
  bind_params();
  std::vector<Tensor> phi, hid, cell;
  for (const PosteriorState& s : states) {
    phi.push_back(s.phi);
    hid.push_back(s.hidden);
    cell.push_back(s.cell);
    accum_mean_.push_back(s.accum_mean);
    accum_precision_.push_back(s.accum_precision);
    history_.push_back(s.history);
  }
  timestep_ = states[0].timestep;
  phi_ = tape_->constant(stack_rows(phi, n));
  hidden_ = tape_->constant(stack_rows(hid, h));
  cell_ = tape_->constant(stack_rows(cell, h));
  mean_ = phi_;
  const auto& post = model.posterior();
  if (is_laplace(post.family)) {
    precision_.assign(batch_, belief::prior_belief(Tensor({n}), post.covariance_or_default()).precision);
  } else if (post.family == Family::VRNN) {
    log_eigs_ = tape_->constant(Tensor::filled({batch_, n}, -std::log(belief::kPriorPrecision)));
    if (post.covariance_or_default() == CovarianceKind::Full) rotation_ = tape_->constant(batch_identity(batch_, n));
  }
}

void Recurrence::bind_params() {
  param_vars_.clear();
  for (const Tensor& t : model_.params().values) param_vars_.push_back(tape_->parameter(t));
}

void Recurrence::compact() {
  if (tape_->recording()) throw ContractError("compact: only valid on a non-recording tape");
  auto fresh = std::make_unique<num::Tape>(false);
  auto move = [&](Var& v) {
    if (v.valid()) v = fresh->constant(v.value());
  };
  move(phi_);
  move(hidden_);
  move(cell_);
  move(mean_);
  move(log_eigs_);
  move(rotation_);
  owned_ = std::move(fresh);
  tape_ = owned_.get();
  bind_params();
}

Var Recurrence::mlp(const std::vector<Model::Layer>& layers, Var x, bool activate_last) {
  const double slope = model_.architecture().leaky_slope;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = num::add_bias(num::matmul(x, param_vars_[layers[l].w]), param_vars_[layers[l].b]);
    if (l + 1 < layers.size() || activate_last) x = num::leaky_relu(x, slope);
  }
  return x;
}

Var Recurrence::embed_state(const Tensor& observations) {
  if (observations.rank() != 2 || observations.dim(0) != batch_ || observations.dim(1) != model_.architecture().observation_dim)
    throw DimensionError("embed_state", observations.shape(), {batch_, model_.architecture().observation_dim});
  return mlp(model_.indices().state_embed, tape_->constant(observations), true);
}

Var Recurrence::embed(const Tensor& obs, std::span<const std::size_t> actions, const Tensor& rewards) {
  const auto& arch = model_.architecture();
  if (rewards.size() != batch_) throw DimensionError("advance rewards", rewards.shape(), {batch_, 1});
  std::vector<Var> parts{embed_state(obs)};
  if (arch.num_actions > 0) {
    if (actions.size() != batch_) throw DimensionError("advance actions", {actions.size()}, {batch_});
    Tensor onehot({batch_, arch.num_actions});
    for (std::size_t b = 0; b < batch_; ++b) {
      if (actions[b] >= arch.num_actions) throw DimensionError("action index out of range", {actions[b]}, {arch.num_actions});
      onehot(b, actions[b]) = 1.0;
    }
    parts.push_back(mlp(model_.indices().action_embed, tape_->constant(std::move(onehot)), true));
  }
  parts.push_back(mlp(model_.indices().reward_embed, tape_->constant(rewards.reshaped({batch_, 1})), true));
  return num::concat_cols(parts);
}

void Recurrence::advance(const Tensor& obs, std::span<const std::size_t> actions, const Tensor& rewards) {
  const auto& post = model_.posterior();
  const std::size_t n = model_.latent_dim();
  const Model::Indices& ix = model_.indices();

  // Remember the current belief as constants for the consecutive KL.
  if (post.family != Family::Dirac) {
    prev_mean_.clear();
    prev_precision_.clear();
    prev_logdet_cov_.clear();
    std::vector<GaussianBelief> previous;
    if (cache_ && cache_->mode == PrecisionCache::Mode::Replay) {
      if (timestep_ >= cache_->previous.size() || cache_->previous[timestep_].size() != batch_)
        throw ContractError("precision cache does not cover this unroll");
      previous = cache_->previous[timestep_];
    } else {
      previous = gaussians();
      if (cache_) {
        if (cache_->previous.size() <= timestep_) cache_->previous.resize(timestep_ + 1);
        cache_->previous[timestep_] = previous;
      }
    }
    for (const GaussianBelief& g : previous) {
      prev_mean_.push_back(g.mean);
      prev_precision_.push_back(g.precision.dense());
      prev_logdet_cov_.push_back(-logdet_precision(g.precision));
    }
  }

  const Var x = embed(obs, actions, rewards);
  const LstmVars out = lstm_cell(param_vars_[ix.lstm_w], param_vars_[ix.lstm_u], param_vars_[ix.lstm_b], x, phi_, cell_);
  const Var phi = num::add_bias(num::matmul(out.hidden, param_vars_[ix.project_w]), param_vars_[ix.project_b]);

  const std::size_t window = post.effective_history_window();
  for (std::size_t b = 0; b < batch_; ++b) {
    if (!is_laplace(post.family)) break;
    history_[b].push_back(row(x.value(), b));
    while (window > 0 && history_[b].size() > window) history_[b].pop_front();
  }

  phi_ = phi;
  hidden_ = out.hidden;
  cell_ = out.cell;

  if (post.family == Family::Dirac) {
    mean_ = phi;
  } else if (post.family == Family::VRNN) {
    const Var head = num::add_bias(num::matmul(phi, param_vars_[ix.posterior_head->w]), param_vars_[ix.posterior_head->b]);
    mean_ = num::slice_cols(head, 0, n);
    log_eigs_ = num::clamp(num::slice_cols(head, n, 2 * n), -10.0, 10.0);
    if (post.covariance_or_default() == CovarianceKind::Full) {
      const Var lower = num::slice_cols(head, 2 * n, head.value().dim(1));
      const Var a = num::reshape(num::matmul(lower, tape_->constant(skew_basis(n))), {batch_, n, n});
      const Var eye = tape_->constant(batch_identity(batch_, n));
      rotation_ = num::bmm(eye - a, num::batch_inverse(eye + a));
    }
  } else {
    std::vector<Tensor> phi_rows, cell_rows;
    for (std::size_t b = 0; b < batch_; ++b) {
      phi_rows.push_back(row(phi.value(), b));
      cell_rows.push_back(row(out.cell.value(), b));
    }
    update_belief(phi_rows, cell_rows);
  }
  ++timestep_;
}

void Recurrence::update_belief(const std::vector<Tensor>& phi_rows, const std::vector<Tensor>& cell_rows) {
  const auto& post = model_.posterior();
  const std::size_t n = model_.latent_dim();
  const CovarianceKind kind = post.covariance_or_default();
  const LstmWeights lw = model_.lstm_weights();
  const Tensor& proj = model_.param("project.w");

  std::vector<PrecisionMatrix> step(batch_);
  const bool replay = cache_ && cache_->mode == PrecisionCache::Mode::Replay;
  if (replay) {
    if (timestep_ >= cache_->steps.size() || cache_->steps[timestep_].size() != batch_)
      throw ContractError("precision cache does not cover this unroll");
    step = cache_->steps[timestep_];
  } else {
    std::vector<Tensor> jac;
    for (std::size_t b = 0; b < batch_; ++b) {
      jac.clear();
      // Every window element is linearized at the newest state.
      for (const Tensor& x : history_[b]) jac.push_back(lstm_state_jacobian(lw, proj, x, phi_rows[b], cell_rows[b]));
      step[b] = belief::laplace_precision(jac, n, kind, belief::kLaplaceJitter);
    }
    if (cache_) {
      if (cache_->steps.size() <= timestep_) cache_->steps.resize(timestep_ + 1);
      cache_->steps[timestep_] = step;
    }
  }

  precision_.resize(batch_);
  if (post.accumulates()) {
    for (std::size_t b = 0; b < batch_; ++b) {
      accum_precision_[b] = accum_precision_[b] + step[b];
      precision_[b] = accum_precision_[b];
    }
  } else {
    precision_ = std::move(step);
  }

  if (post.sums_means()) {
    // The past mean enters as a constant (stop-gradient).
    if (replay) {
      if (timestep_ >= cache_->past_means.size()) throw ContractError("precision cache does not cover this unroll");
      accum_mean_ = cache_->past_means[timestep_];
    } else if (cache_) {
      if (cache_->past_means.size() <= timestep_) cache_->past_means.resize(timestep_ + 1);
      cache_->past_means[timestep_] = accum_mean_;
    }
    mean_ = phi_ + tape_->constant(stack_rows(accum_mean_, n));
    for (std::size_t b = 0; b < batch_; ++b) accum_mean_[b] = row(mean_.value(), b);
  } else {
    mean_ = phi_;
  }
}

std::vector<GaussianBelief> Recurrence::gaussians() const {
  const auto& post = model_.posterior();
  std::vector<GaussianBelief> out;
  if (post.family == Family::Dirac) return out;
  const std::size_t n = model_.latent_dim();
  for (std::size_t b = 0; b < batch_; ++b) {
    Tensor mu = row(mean_.value(), b);
    if (is_laplace(post.family)) {
      out.push_back({std::move(mu), precision_[b]});
      continue;
    }
    const Tensor s = row(log_eigs_.value(), b);
    const Eigen::VectorXd inv = (-s.vec().array()).exp();
    if (post.covariance_or_default() == CovarianceKind::Diagonal) {
      out.push_back({std::move(mu), PrecisionMatrix::diagonal(Tensor::from_vector(inv))});
      continue;
    }
    const auto u = rotation_.value().slice(b);
    RowMatrix p = u * inv.asDiagonal() * u.transpose();
    p = 0.5 * (p + p.transpose()).eval();
    (void)n;
    out.push_back({std::move(mu), PrecisionMatrix::full(Tensor::from_eigen(p))});
  }
  return out;
}

PosteriorState Recurrence::state(std::size_t b) const {
  PosteriorState s;
  s.phi = row(phi_.value(), b);
  s.hidden = row(hidden_.value(), b);
  s.cell = row(cell_.value(), b);
  s.accum_mean = accum_mean_.at(b);
  s.accum_precision = accum_precision_.at(b);
  s.history = history_.at(b);
  s.timestep = timestep_;
  return s;
}

Var Recurrence::sample_latents(std::mt19937_64& rng) {
  const auto& post = model_.posterior();
  if (post.family == Family::Dirac) return mean_;
  const std::size_t n = model_.latent_dim();
  std::normal_distribution<double> normal;
  Tensor eps({batch_, n});
  for (double& v : eps.data()) v = normal(rng);
  if (is_laplace(post.family)) {
    Tensor noise({batch_, n});
    for (std::size_t b = 0; b < batch_; ++b) {
      const Tensor e = belief::sample_noise(precision_[b], eps.data().subspan(b * n, n));
      std::copy(e.data().begin(), e.data().end(), noise.data().begin() + static_cast<std::ptrdiff_t>(b * n));
    }
    return mean_ + tape_->constant(std::move(noise));
  }
  const Var scaled = num::exp(0.5 * log_eigs_) * tape_->constant(std::move(eps));
  if (post.covariance_or_default() == CovarianceKind::Diagonal) return mean_ + scaled;
  return mean_ + num::reshape(num::bmm(rotation_, num::reshape(scaled, {batch_, n, 1})), {batch_, n});
}

Var Recurrence::kl_to_previous() const {
  const auto& post = model_.posterior();
  if (post.family == Family::Dirac) throw ContractError("kl_to_previous: undefined for the dirac family");
  if (prev_mean_.size() != batch_) throw ContractError("kl_to_previous: no previous belief (advance first)");
  const std::size_t n = model_.latent_dim();
  num::Tape& tape = *tape_;

  Tensor prec({batch_, n, n});
  for (std::size_t b = 0; b < batch_; ++b) prec.slice(b) = prev_precision_[b].mat();
  const Var p = tape.constant(prec);
  const Var diff = mean_ - tape.constant(stack_rows(prev_mean_, n));
  const Var pd = num::reshape(num::bmm(p, num::reshape(diff, {batch_, n, 1})), {batch_, n});
  const Var quad = num::row_sum(diff * pd);

  Tensor offset({batch_});
  if (is_laplace(post.family)) {
    for (std::size_t b = 0; b < batch_; ++b) {
      const Tensor cov = belief::covariance({Tensor({n}), precision_[b]});
      const double trace = (prev_precision_[b].mat().array() * cov.mat().array()).sum();
      offset[b] = 0.5 * (trace - static_cast<double>(n) + prev_logdet_cov_[b] + logdet_precision(precision_[b]));
    }
    return 0.5 * quad + tape.constant(std::move(offset));
  }

  for (std::size_t b = 0; b < batch_; ++b) offset[b] = 0.5 * (prev_logdet_cov_[b] - static_cast<double>(n));
  const Var eig = num::exp(log_eigs_);
  Var trace;
  if (post.covariance_or_default() == CovarianceKind::Diagonal) {
    Tensor diag({batch_, n});
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t i = 0; i < n; ++i) diag(b, i) = prev_precision_[b](i, i);
    trace = num::row_sum(eig * tape.constant(std::move(diag)));
  } else {
    const Var pu = num::scale_columns(num::bmm(p, rotation_), eig);
    trace = num::row_sum(num::reshape(pu * rotation_, {batch_, n * n}));
  }
  return 0.5 * (trace + quad - num::row_sum(log_eigs_)) + tape.constant(std::move(offset));
}

Var Recurrence::policy_head(const Var& latents, const Var& state_embedding) {
  const auto& arch = model_.architecture();
  if (arch.head != HeadKind::Policy) throw ContractError("policy_head: model has a regression head");
  Var in = latents;
  if (arch.policy_uses_state) {
    const Var parts[] = {latents, state_embedding};
    in = num::concat_cols(parts);
  }
  const Var h = mlp(model_.indices().head, in, true);
  const auto& o = model_.indices().head_out;
  return num::add_bias(num::matmul(h, param_vars_[o.w]), param_vars_[o.b]);
}

Var Recurrence::regression_head(const Var& latents, const Var& state_embedding) {
  if (model_.architecture().head != HeadKind::Regression) throw ContractError("regression_head: model has a policy head");
  const Var parts[] = {latents, state_embedding};
  const Var h = mlp(model_.indices().head, num::concat_cols(parts), true);
  const auto& o = model_.indices().head_out;
  return num::add_bias(num::matmul(h, param_vars_[o.w]), param_vars_[o.b]);
}

Recurrence::Aggregate Recurrence::predictive(const Var& state_embedding, std::size_t k, std::mt19937_64& rng,
                                             bool at_mean) {
  if (k < 1) throw ContractError("predictive: k must be >= 1");
  if (at_mean) k = 1;
  const auto& arch = model_.architecture();
  const bool policy = arch.head == HeadKind::Policy;
  const double w = 1.0 / static_cast<double>(k);
  Aggregate agg;
  for (std::size_t s = 0; s < k; ++s) {
    const Var z = at_mean ? mean_ : sample_latents(rng);
    Var a, b;
    if (policy) {
      const Var out = policy_head(z, state_embedding);
      a = num::slice_cols(out, 0, arch.num_actions);
      b = num::reshape(num::slice_cols(out, arch.num_actions, arch.num_actions + 1), {batch_});
    } else {
      const Var out = regression_head(z, state_embedding);
      a = num::reshape(num::slice_cols(out, 0, 1), {batch_});
      b = num::exp(num::reshape(num::clamp(num::slice_cols(out, 1, 2), -13.8, 6.0), {batch_}));
    }
    if (k > 1) {
      a = w * a;
      b = w * b;
    }
    if (s == 0) {
      (policy ? agg.logits : agg.mean) = a;
      (policy ? agg.value : agg.variance) = b;
    } else {
      (policy ? agg.logits : agg.mean) = (policy ? agg.logits : agg.mean) + a;
      (policy ? agg.value : agg.variance) = (policy ? agg.value : agg.variance) + b;
    }
  }
  return agg;
}

// ---------------------------------------------------------------- single trajectory

std::pair<PosteriorState, Belief> step(const Model& model, const PosteriorState& state, const StepInput& input) {
  num::Tape tape(false);
  Recurrence r(model, tape, std::span<const PosteriorState>(&state, 1));
  const std::size_t os = model.architecture().observation_dim;
  if (input.observation.size() != os) throw DimensionError("step observation", input.observation.shape(), {os});
  const std::size_t action[] = {input.action};
  r.advance(input.observation.reshaped({1, os}), action, Tensor({1, 1}, {input.reward}));
  Belief b;
  if (model.posterior().family == Family::Dirac) {
    b = row(r.mean().value(), 0);
  } else {
    b = r.gaussians().front();
  }
  return {r.state(0), std::move(b)};
}

Tensor average_logits(std::span<const Tensor> logits) {
  if (logits.empty()) throw ContractError("average_logits: need at least one vector");
  Tensor out = logits.front();
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i].shape() != out.shape()) throw DimensionError("average_logits", out.shape(), logits[i].shape());
    out.vec() += logits[i].vec();
  }
  if (logits.size() > 1) out.vec() /= static_cast<double>(logits.size());
  return out;
}

PredictiveOutput posterior_predictive(const Model& model, const Belief& belief, const Tensor& observation, std::size_t k,
                                      std::mt19937_64& rng) {
  if (k < 1) throw ContractError("posterior_predictive: k must be >= 1");
  const auto& arch = model.architecture();
  num::Tape tape(false);
  Recurrence r(model, tape, 1);
  const Var emb = r.embed_state(observation.reshaped({1, arch.observation_dim}));
  std::vector<Tensor> latents;
  if (const auto* point = std::get_if<Tensor>(&belief)) {
    latents.assign(k, *point);
  } else {
    latents = belief::sample(std::get<GaussianBelief>(belief), rng, k);
  }
  const bool policy = arch.head == HeadKind::Policy;
  PredictiveOutput out;
  out.logits = Tensor({policy ? arch.num_actions : 0});
  const double w = 1.0 / static_cast<double>(k);
  std::vector<Tensor> logits;
  for (const Tensor& z : latents) {
    const Var zv = tape.constant(z.reshaped({1, z.size()}));
    if (policy) {
      const Tensor o = r.policy_head(zv, emb).value();
      logits.emplace_back(Shape{arch.num_actions}, std::vector<double>(o.data().begin(), o.data().end() - 1));
      out.value += w * o[arch.num_actions];
    } else {
      const Tensor o = r.regression_head(zv, emb).value();
      out.mean += w * o[0];
      out.variance += w * std::exp(std::clamp(o[1], -13.8, 6.0));
    }
  }
  if (policy) out.logits = average_logits(logits);
  return out;
}

}  // namespace lvrnn::model
