#include "lvrnn/model/lstm.hpp"

#include <cmath>

namespace lvrnn::model {

namespace {

double sigm(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

void check(const LstmWeights& wt, std::size_t in, std::size_t r, std::size_t h) {
  const std::size_t g = 4 * wt.hidden();
  if (wt.w.rank() != 2 || wt.w.dim(0) != in || wt.w.dim(1) != g) throw num::DimensionError("lstm input weights", wt.w.shape(), {in, g});
  if (wt.u.rank() != 2 || wt.u.dim(0) != r || wt.u.dim(1) != g) throw num::DimensionError("lstm recurrent weights", wt.u.shape(), {r, g});
  if (h != wt.hidden()) throw num::DimensionError("lstm cell", {h}, {wt.hidden()});
}

Eigen::VectorXd preactivation(const LstmWeights& wt, const Tensor& input, const Tensor& recurrent) {
  return wt.w.mat().transpose() * input.vec() + wt.u.mat().transpose() * recurrent.vec() + wt.b.vec();
}

}  // namespace

LstmOutput lstm_cell(const LstmWeights& wt, const Tensor& input, const LstmCarry& carry) {
  check(wt, input.size(), carry.recurrent.size(), carry.cell.size());
  const std::size_t h = wt.hidden();
  const Eigen::VectorXd a = preactivation(wt, input, carry.recurrent);
  LstmOutput out{Tensor({h}), Tensor({h})};
  for (std::size_t j = 0; j < h; ++j) {
    const double i = sigm(a[static_cast<Eigen::Index>(j)]);
    const double f = sigm(a[static_cast<Eigen::Index>(h + j)]);
    const double g = std::tanh(a[static_cast<Eigen::Index>(2 * h + j)]);
    const double o = sigm(a[static_cast<Eigen::Index>(3 * h + j)]);
    const double c = f * carry.cell[j] + i * g;
    out.cell[j] = c;
    out.hidden[j] = o * std::tanh(c);
  }
  return out;
}

LstmVars lstm_cell(const Var& w, const Var& u, const Var& b, const Var& input, const Var& recurrent, const Var& cell) {
  using namespace num;
  const std::size_t h = b.value().size() / 4;
  Var a = add_bias(add(matmul(input, w), matmul(recurrent, u)), b);
  Var i = sigmoid(slice_cols(a, 0, h));
  Var f = sigmoid(slice_cols(a, h, 2 * h));
  Var g = num::tanh(slice_cols(a, 2 * h, 3 * h));
  Var o = sigmoid(slice_cols(a, 3 * h, 4 * h));
  Var c = f * cell + i * g;
  return {o * num::tanh(c), c};
}

DualTensor lstm_project_dual(const LstmWeights& wt, const Tensor& proj_w, const Tensor& proj_b, const Tensor& input,
                             const DualTensor& recurrent, const Tensor& cell) {
  check(wt, input.size(), recurrent.primal.size(), cell.size());
  const std::size_t h = wt.hidden();
  DualTensor a = num::dual::add(num::dual::linear(recurrent, wt.u),
                                DualTensor::constant(Tensor::from_vector(wt.w.mat().transpose() * input.vec() + wt.b.vec())));
  DualTensor i = num::dual::sigmoid(num::dual::slice(a, 0, h));
  DualTensor f = num::dual::sigmoid(num::dual::slice(a, h, 2 * h));
  DualTensor g = num::dual::tanh(num::dual::slice(a, 2 * h, 3 * h));
  DualTensor o = num::dual::sigmoid(num::dual::slice(a, 3 * h, 4 * h));
  DualTensor c = num::dual::add(num::dual::mul(f, DualTensor::constant(cell)), num::dual::mul(i, g));
  DualTensor hid = num::dual::mul(o, num::dual::tanh(c));
  return num::dual::affine(hid, proj_w, proj_b);
}

Tensor lstm_state_jacobian(const LstmWeights& wt, const Tensor& proj_w, const Tensor& input, const Tensor& recurrent,
                           const Tensor& cell) {
  check(wt, input.size(), recurrent.size(), cell.size());
  const auto h = static_cast<Eigen::Index>(wt.hidden());
  const auto r = static_cast<Eigen::Index>(recurrent.size());
  const Eigen::VectorXd a = preactivation(wt, input, recurrent);
  // Tangents of the pre-activations for every basis direction at once: [4H x r].
  const auto da = wt.u.mat().transpose();
  Eigen::ArrayXd i(h), f(h), g(h), o(h), c(h), tc(h);
  for (Eigen::Index j = 0; j < h; ++j) {
    i[j] = sigm(a[j]);
    f[j] = sigm(a[h + j]);
    g[j] = std::tanh(a[2 * h + j]);
    o[j] = sigm(a[3 * h + j]);
    c[j] = f[j] * cell[static_cast<std::size_t>(j)] + i[j] * g[j];
    tc[j] = std::tanh(c[j]);
  }
  const Eigen::ArrayXd cell_arr = cell.vec().array();
  const Eigen::ArrayXd di = i * (1 - i);
  const Eigen::ArrayXd df = f * (1 - f);
  const Eigen::ArrayXd dg = 1 - g * g;
  const Eigen::ArrayXd dout = o * (1 - o);
  num::RowMatrix dc = (df * cell_arr).matrix().asDiagonal() * da.middleRows(h, h);
  dc.noalias() += (di * g).matrix().asDiagonal() * da.topRows(h);
  dc.noalias() += (i * dg).matrix().asDiagonal() * da.middleRows(2 * h, h);
  num::RowMatrix dh = (dout * tc).matrix().asDiagonal() * da.bottomRows(h);
  dh.noalias() += (o * (1 - tc * tc)).matrix().asDiagonal() * dc;
  Tensor jac({proj_w.dim(1), static_cast<std::size_t>(r)});
  jac.mat().noalias() = proj_w.mat().transpose() * dh;
  return jac;
}

}  // namespace lvrnn::model
