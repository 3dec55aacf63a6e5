#include "lvrnn/num/dual.hpp"

#include <cmath>

namespace lvrnn::num {

DualTensor::DualTensor(Tensor p, Tensor t) : primal(std::move(p)), tangent(std::move(t)) {
  if (primal.shape() != tangent.shape()) throw DimensionError("dual", primal.shape(), tangent.shape());
}

DualTensor DualTensor::constant(Tensor p) {
  Tensor t(p.shape());
  return {std::move(p), std::move(t)};
}

namespace dual {

namespace {
template <typename F, typename D>
DualTensor elementwise(const DualTensor& a, F f, D df) {
  DualTensor out{a.primal, a.tangent};
  for (std::size_t i = 0; i < a.primal.size(); ++i) {
    const double x = a.primal[i];
    out.primal[i] = f(x);
    out.tangent[i] = df(x, out.primal[i]) * a.tangent[i];
  }
  return out;
}

void check(const char* op, const DualTensor& a, const DualTensor& b) {
  if (a.shape() != b.shape()) throw DimensionError(op, a.shape(), b.shape());
}
}  // namespace

DualTensor add(const DualTensor& a, const DualTensor& b) {
  check("dual::add", a, b);
  DualTensor out = a;
  out.primal.vec() += b.primal.vec();
  out.tangent.vec() += b.tangent.vec();
  return out;
}

DualTensor sub(const DualTensor& a, const DualTensor& b) {
  check("dual::sub", a, b);
  DualTensor out = a;
  out.primal.vec() -= b.primal.vec();
  out.tangent.vec() -= b.tangent.vec();
  return out;
}

DualTensor mul(const DualTensor& a, const DualTensor& b) {
  check("dual::mul", a, b);
  DualTensor out = a;
  out.primal.vec().array() = a.primal.vec().array() * b.primal.vec().array();
  out.tangent.vec().array() =
      a.tangent.vec().array() * b.primal.vec().array() + a.primal.vec().array() * b.tangent.vec().array();
  return out;
}

DualTensor linear(const DualTensor& x, const Tensor& w) {
  if (x.primal.rank() != 1 || w.rank() != 2 || w.dim(0) != x.primal.dim(0)) throw DimensionError("dual::linear", x.shape(), w.shape());
  Tensor p({w.dim(1)});
  Tensor t({w.dim(1)});
  p.vec().noalias() = w.mat().transpose() * x.primal.vec();
  t.vec().noalias() = w.mat().transpose() * x.tangent.vec();
  return {std::move(p), std::move(t)};
}

DualTensor affine(const DualTensor& x, const Tensor& w, const Tensor& b) {
  DualTensor out = linear(x, w);
  if (b.shape() != out.shape()) throw DimensionError("dual::affine bias", out.shape(), b.shape());
  out.primal.vec() += b.vec();
  return out;
}

DualTensor sigmoid(const DualTensor& a) {
  return elementwise(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

DualTensor tanh(const DualTensor& a) {
  return elementwise(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

DualTensor sin(const DualTensor& a) {
  return elementwise(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

DualTensor exp(const DualTensor& a) {
  return elementwise(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

DualTensor leaky_relu(const DualTensor& a, double slope) {
  return elementwise(a, [slope](double x) { return x > 0 ? x : slope * x; },
                     [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

DualTensor slice(const DualTensor& a, std::size_t begin, std::size_t end) {
  if (a.primal.rank() != 1 || begin > end || end > a.primal.size()) throw DimensionError("dual::slice", a.shape(), Shape{begin, end});
  const auto b = static_cast<Eigen::Index>(begin);
  const auto n = static_cast<Eigen::Index>(end - begin);
  return {Tensor::from_vector(Eigen::VectorXd(a.primal.vec().segment(b, n))),
          Tensor::from_vector(Eigen::VectorXd(a.tangent.vec().segment(b, n)))};
}

}  // namespace dual

Tensor jvp(const DualMap& f, const Tensor& at, const Tensor& direction) {
  if (at.shape() != direction.shape()) throw DimensionError("jvp", at.shape(), direction.shape());
  return f(DualTensor(at, direction)).tangent;
}

Tensor jacobian_wrt_state(const DualStep& step, const Tensor& input, const Tensor& state) {
  if (state.rank() != 1) throw DimensionError("jacobian_wrt_state: state must be a vector", state.shape(), state.shape());
  const std::size_t d = state.size();
  Tensor jac;
  for (std::size_t j = 0; j < d; ++j) {
    Tensor e(state.shape());
    e[j] = 1.0;
    const Tensor col = step(input, DualTensor(state, e)).tangent;
    if (j == 0) jac = Tensor({col.size(), d});
    for (std::size_t i = 0; i < col.size(); ++i) jac(i, j) = col[i];
  }
  return jac;
}

}  // namespace lvrnn::num
