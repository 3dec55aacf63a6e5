#include "lvrnn/train/optim.hpp"

#include <cmath>
#include <limits>

namespace lvrnn::train {

double clip_gradients(std::vector<Tensor>& grads, double max_norm, double element_clip) {
  double sq = 0.0;
  for (const Tensor& g : grads) sq += g.vec().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (Tensor& g : grads) g.vec() *= s;
  }
  for (Tensor& g : grads) g.vec() = g.vec().cwiseMax(-element_clip).cwiseMin(element_clip);
  return norm;
}

AdamW::StepResult AdamW::step(ParamSet& params, std::vector<Tensor> grads) {
  if (grads.size() != params.size()) throw num::DimensionError("AdamW: gradient count does not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (grads[i].shape() != params.values[i].shape())
      throw num::DimensionError("AdamW gradient " + params.names[i], grads[i].shape(), params.values[i].shape());

  StepResult res;
  for (const Tensor& g : grads) {
    if (!g.all_finite()) {
      ++skipped_;
      res.grad_norm = std::numeric_limits<double>::quiet_NaN();
      return res;
    }
  }
  res.grad_norm = clip_gradients(grads, cfg_.max_global_norm, cfg_.element_clip);
  if (m_.empty()) {
    for (const Tensor& p : params.values) {
      m_.emplace_back(p.shape());
      v_.emplace_back(p.shape());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto m = m_[i].vec().array();
    auto v = v_[i].vec().array();
    const auto g = grads[i].vec().array();
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.square();
    auto p = params.values[i].vec().array();
    p -= cfg_.learning_rate * ((m / c1) / ((v / c2).sqrt() + cfg_.epsilon) + cfg_.weight_decay * p);
  }
  res.applied = true;
  return res;
}

}  // namespace lvrnn::train
