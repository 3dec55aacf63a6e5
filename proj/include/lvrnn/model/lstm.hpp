#pragma once

#include "lvrnn/num/dual.hpp"
#include "lvrnn/num/ops.hpp"

namespace lvrnn::model {

using num::DualTensor;
using num::Tensor;
using num::Var;

/// Gate pre-activations are input·w + recurrent·u + b with gates ordered
/// [input, forget, candidate, output].
struct LstmWeights {
  const Tensor& w;  // [in x 4H]
  const Tensor& u;  // [r x 4H]
  const Tensor& b;  // [4H]
  std::size_t hidden() const { return b.size() / 4; }
};

struct LstmCarry {
  Tensor recurrent;  // [r], the projected output of the previous step
  Tensor cell;       // [H]
};

struct LstmOutput {
  Tensor hidden;  // [H]
  Tensor cell;    // [H]
};

/// One LSTM step on a single trajectory.
LstmOutput lstm_cell(const LstmWeights& weights, const Tensor& input, const LstmCarry& carry);

struct LstmVars {
  Var hidden;
  Var cell;
};

/// Batched LSTM step on the tape: input [B x in], recurrent [B x r], cell [B x H].
LstmVars lstm_cell(const Var& w, const Var& u, const Var& b, const Var& input, const Var& recurrent, const Var& cell);

/// Projected output (hidden·proj_w + proj_b) as a function of the recurrent
/// input, with `input` and `cell` held fixed. Used for jvp/Jacobian checks.
DualTensor lstm_project_dual(const LstmWeights& weights, const Tensor& proj_w, const Tensor& proj_b,
                             const Tensor& input, const DualTensor& recurrent, const Tensor& cell);

/// ∂(projected output)/∂(recurrent input) [r x r], all basis directions
/// propagated in one forward-mode sweep.
Tensor lstm_state_jacobian(const LstmWeights& weights, const Tensor& proj_w, const Tensor& input,
                           const Tensor& recurrent, const Tensor& cell);

}  // namespace lvrnn::model
