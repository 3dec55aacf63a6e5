#pragma once

// Test-only central-difference oracles.

#include <functional>
#include <random>
#include <vector>

#include "lvrnn/num/ops.hpp"

namespace lvrnn::testing {

using num::Tape;
using num::Tensor;
using num::Var;

using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

inline Tensor random_tensor(num::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline double eval_scalar(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  Tape tape(false);
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.constant(t));
  return f(tape, vars).value().item();
}

inline std::vector<Tensor> reverse_grad(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.parameter(t));
  Var out = f(tape, vars);
  return tape.grad(out, vars);
}

inline std::vector<Tensor> central_difference(const ScalarFn& f, std::vector<Tensor> inputs, double h = 1e-5) {
  std::vector<Tensor> grads;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor g(inputs[k].shape());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      inputs[k][i] = x0 + h;
      const double fp = eval_scalar(f, inputs);
      inputs[k][i] = x0 - h;
      const double fm = eval_scalar(f, inputs);
      inputs[k][i] = x0;
      g[i] = (fp - fm) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

/// Norm-wise relative error between two gradient lists.
inline double relative_error(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff += (a[k].vec() - b[k].vec()).squaredNorm();
    na += a[k].vec().squaredNorm();
    nb += b[k].vec().squaredNorm();
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / scale;
}

}  // namespace lvrnn::testing
