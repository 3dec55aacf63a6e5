#pragma once

#include <functional>

#include "lvrnn/num/tensor.hpp"

namespace lvrnn::num {

/// Forward-mode carrier: a value and one directional derivative of it.
struct DualTensor {
  Tensor primal;
  Tensor tangent;

  DualTensor() = default;
  DualTensor(Tensor p, Tensor t);
  /// Constant w.r.t. the differentiation direction.
  static DualTensor constant(Tensor p);

  const Shape& shape() const { return primal.shape(); }
};

namespace dual {

DualTensor add(const DualTensor& a, const DualTensor& b);
DualTensor sub(const DualTensor& a, const DualTensor& b);
DualTensor mul(const DualTensor& a, const DualTensor& b);
/// Row-vector affine map x W + b for x [in], W [in x out], b [out].
DualTensor affine(const DualTensor& x, const Tensor& w, const Tensor& b);
/// x W for x [in], W [in x out].
DualTensor linear(const DualTensor& x, const Tensor& w);
DualTensor sigmoid(const DualTensor& a);
DualTensor tanh(const DualTensor& a);
DualTensor sin(const DualTensor& a);
DualTensor exp(const DualTensor& a);
DualTensor leaky_relu(const DualTensor& a, double slope = 0.01);
DualTensor slice(const DualTensor& a, std::size_t begin, std::size_t end);

}  // namespace dual

using DualMap = std::function<DualTensor(const DualTensor&)>;
/// A recurrent step seen as a map of its state, with the input held fixed.
using DualStep = std::function<DualTensor(const Tensor& input, const DualTensor& state)>;

/// (∇f)(at) · direction by forward accumulation.
Tensor jvp(const DualMap& f, const Tensor& at, const Tensor& direction);

/// Full Jacobian [out x d] of `step(input, ·)` at `state`, one jvp per unit
/// basis direction.
Tensor jacobian_wrt_state(const DualStep& step, const Tensor& input, const Tensor& state);

}  // namespace lvrnn::num
