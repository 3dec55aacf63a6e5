#pragma once

#include <cstddef>
#include <vector>

#include "lvrnn/model/params.hpp"

namespace lvrnn::train {

using model::ParamSet;
using num::Tensor;

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_global_norm = 1.0;
  double element_clip = 5.0;
};

/// Scales `grads` to global norm ≤ max_norm, then clamps every element to
/// [−element_clip, element_clip]. Returns the norm before clipping.
double clip_gradients(std::vector<Tensor>& grads, double max_norm, double element_clip);

/// Adam with decoupled weight decay.
class AdamW {
 public:
  explicit AdamW(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  struct StepResult {
    bool applied = false;
    double grad_norm = 0.0;
  };

  /// Clips and applies one update. A non-finite gradient leaves both the
  /// parameters and the moments untouched and is counted in `skipped()`.
  StepResult step(ParamSet& params, std::vector<Tensor> grads);

  const OptimizerConfig& config() const { return cfg_; }
  std::size_t steps() const { return t_; }
  std::size_t skipped() const { return skipped_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  OptimizerConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace lvrnn::train
