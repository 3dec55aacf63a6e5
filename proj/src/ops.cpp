#include "lvrnn/num/ops.hpp"

#include <algorithm>
#include <cmath>

namespace lvrnn::num {

namespace {

void same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
}

void same_shape(const char* op, const Var& a, const Var& b) {
  same_tape(a, b);
  if (a.shape() != b.shape()) throw DimensionError(op, a.shape(), b.shape());
}

// Accumulates into the adjoint of `v` when it participates in the gradient.
template <typename F>
void push_to(Tape& t, const Var& v, F&& f) {
  if (t.requires_grad(v)) f(t.adjoint(v));
}

template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  return a.tape().record(std::move(y), {a}, [a, deriv](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& x = a.value();
    const Tensor& y = self.value();
    push_to(t, a, [&](Tensor& ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
    });
  });
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.value().rank() != rank) throw DimensionError(op, a.shape(), Shape(rank, 0));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) throw DimensionError("matmul", av.shape(), bv.shape());
  Tensor out({av.dim(0), bv.dim(1)});
  out.mat().noalias() = av.mat() * bv.mat();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.mat().noalias() += g.mat() * b.value().mat().transpose(); });
    push_to(t, b, [&](Tensor& gb) { gb.mat().noalias() += a.value().mat().transpose() * g.mat(); });
  });
}

Var add(const Var& a, const Var& b) {
  same_shape("add", a, b);
  Tensor out = a.value();
  out.vec() += b.value().vec();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.vec() += g.vec(); });
    push_to(t, b, [&](Tensor& gb) { gb.vec() += g.vec(); });
  });
}

Var sub(const Var& a, const Var& b) {
  same_shape("sub", a, b);
  Tensor out = a.value();
  out.vec() -= b.value().vec();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.vec() += g.vec(); });
    push_to(t, b, [&](Tensor& gb) { gb.vec() -= g.vec(); });
  });
}

Var mul(const Var& a, const Var& b) {
  same_shape("mul", a, b);
  Tensor out = a.value();
  out.vec().array() *= b.value().vec().array();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.vec().array() += g.vec().array() * b.value().vec().array(); });
    push_to(t, b, [&](Tensor& gb) { gb.vec().array() += g.vec().array() * a.value().vec().array(); });
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  out.vec() *= s;
  return a.tape().record(std::move(out), {a}, [a, s](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.vec() += s * g.vec(); });
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  out.vec().array() += s;
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.vec() += g.vec(); });
  });
}

Var add_bias(const Var& a, const Var& bias) {
  same_tape(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (av.rank() != 2 || bv.rank() != 1 || av.dim(1) != bv.dim(0)) throw DimensionError("add_bias", av.shape(), bv.shape());
  Tensor out = av;
  out.mat().rowwise() += bv.vec().transpose();
  return a.tape().record(std::move(out), {a, bias}, [a, bias](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.vec() += g.vec(); });
    push_to(t, bias, [&](Tensor& gb) { gb.vec() += g.mat().colwise().sum().transpose(); });
  });
}

Var scale_rows(const Var& a, const Var& v) {
  same_tape(a, v);
  const Tensor& av = a.value();
  const Tensor& vv = v.value();
  if (av.rank() != 2 || vv.rank() != 1 || av.dim(0) != vv.dim(0)) throw DimensionError("scale_rows", av.shape(), vv.shape());
  Tensor out = av;
  out.mat().array().colwise() *= vv.vec().array();
  return a.tape().record(std::move(out), {a, v}, [a, v](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.mat().array() += g.mat().array().colwise() * v.value().vec().array(); });
    push_to(t, v, [&](Tensor& gv) {
      gv.vec() += (g.mat().array() * a.value().mat().array()).rowwise().sum().matrix();
    });
  });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var leaky_relu(const Var& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0 ? x : slope * x; }, [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var minimum(const Var& a, const Var& b) {
  same_shape("minimum", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::min(av[i], bv[i]);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    push_to(t, a, [&](Tensor& ga) {
      for (std::size_t i = 0; i < g.size(); ++i)
        if (av[i] <= bv[i]) ga[i] += g[i];
    });
    push_to(t, b, [&](Tensor& gb) {
      for (std::size_t i = 0; i < g.size(); ++i)
        if (bv[i] < av[i]) gb[i] += g[i];
    });
  });
}

Var sum(const Var& a) {
  Tensor out = Tensor::scalar(a.value().vec().sum());
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Var& self) {
    const double g = t.adjoint(self)[0];
    push_to(t, a, [&](Tensor& ga) { ga.vec().array() += g; });
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
  require_rank("row_sum", a, 2);
  Tensor out({a.value().dim(0)});
  out.vec() = a.value().mat().rowwise().sum();
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.mat().colwise() += g.vec(); });
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  const std::size_t rows = parts[0].value().dim(0);
  std::size_t cols = 0;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    if (p.value().rank() != 2 || p.value().dim(0) != rows) throw DimensionError("concat_cols", parts[0].shape(), p.shape());
    cols += p.value().dim(1);
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const auto w = static_cast<Eigen::Index>(p.value().dim(1));
    out.mat().middleCols(static_cast<Eigen::Index>(off), w) = p.value().mat();
    off += p.value().dim(1);
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [keep](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    std::size_t off = 0;
    for (const Var& p : keep) {
      const auto w = static_cast<Eigen::Index>(p.value().dim(1));
      push_to(t, p, [&](Tensor& gp) { gp.mat() += g.mat().middleCols(static_cast<Eigen::Index>(off), w); });
      off += p.value().dim(1);
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  require_rank("slice_cols", a, 2);
  if (begin > end || end > a.value().dim(1)) throw DimensionError("slice_cols", a.shape(), Shape{begin, end});
  const auto b = static_cast<Eigen::Index>(begin);
  const auto w = static_cast<Eigen::Index>(end - begin);
  Tensor out({a.value().dim(0), end - begin});
  out.mat() = a.value().mat().middleCols(b, w);
  return a.tape().record(std::move(out), {a}, [a, b, w](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.mat().middleCols(b, w) += g.mat(); });
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.vec() += g.vec(); });
  });
}

Var transpose(const Var& a) {
  require_rank("transpose", a, 2);
  Tensor out({a.value().dim(1), a.value().dim(0)});
  out.mat() = a.value().mat().transpose();
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) { ga.mat() += g.mat().transpose(); });
  });
}

Var log_softmax(const Var& a) {
  require_rank("log_softmax", a, 2);
  const Tensor& x = a.value();
  Tensor out = x;
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    auto row = out.mat().row(static_cast<Eigen::Index>(i));
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    row.array() -= lse;
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) {
      const auto p = self.value().mat().array().exp();
      const Eigen::VectorXd gs = g.mat().rowwise().sum();
      ga.mat().array() += g.mat().array() - p.colwise() * gs.array();
    });
  });
}

Var pick(const Var& a, std::span<const std::size_t> index) {
  require_rank("pick", a, 2);
  const Tensor& x = a.value();
  if (index.size() != x.dim(0)) throw DimensionError("pick", x.shape(), Shape{index.size()});
  Tensor out({x.dim(0)});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.dim(1)) throw DimensionError("pick index out of range", x.shape(), Shape{index[i]});
    out[i] = x(i, index[i]);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.tape().record(std::move(out), {a}, [a, idx](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) {
      for (std::size_t i = 0; i < idx.size(); ++i) ga(i, idx[i]) += g[i];
    });
  });
}

Var bmm(const Var& a, const Var& b) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1))
    throw DimensionError("bmm", av.shape(), bv.shape());
  Tensor out({av.dim(0), av.dim(1), bv.dim(2)});
  for (std::size_t i = 0; i < av.dim(0); ++i) out.slice(i).noalias() = av.slice(i) * bv.slice(i);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    push_to(t, a, [&](Tensor& ga) {
      for (std::size_t i = 0; i < av.dim(0); ++i) ga.slice(i).noalias() += g.slice(i) * bv.slice(i).transpose();
    });
    push_to(t, b, [&](Tensor& gb) {
      for (std::size_t i = 0; i < av.dim(0); ++i) gb.slice(i).noalias() += av.slice(i).transpose() * g.slice(i);
    });
  });
}

Var batch_transpose(const Var& a) {
  require_rank("batch_transpose", a, 3);
  const Tensor& av = a.value();
  Tensor out({av.dim(0), av.dim(2), av.dim(1)});
  for (std::size_t i = 0; i < av.dim(0); ++i) out.slice(i) = av.slice(i).transpose();
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    push_to(t, a, [&](Tensor& ga) {
      for (std::size_t i = 0; i < g.dim(0); ++i) ga.slice(i) += g.slice(i).transpose();
    });
  });
}

Var batch_inverse(const Var& a) {
  require_rank("batch_inverse", a, 3);
  const Tensor& av = a.value();
  if (av.dim(1) != av.dim(2)) throw DimensionError("batch_inverse", av.shape(), av.shape());
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.dim(0); ++i) {
    Eigen::PartialPivLU<RowMatrix> lu(av.slice(i));
    if (!(lu.rcond() > 1e-14)) throw std::runtime_error("batch_inverse: singular matrix at batch index " + std::to_string(i));
    out.slice(i) = lu.inverse();
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& y = self.value();
    push_to(t, a, [&](Tensor& ga) {
      for (std::size_t i = 0; i < g.dim(0); ++i)
        ga.slice(i).noalias() -= y.slice(i).transpose() * g.slice(i) * y.slice(i).transpose();
    });
  });
}

Var scale_columns(const Var& a, const Var& v) {
  same_tape(a, v);
  const Tensor& av = a.value();
  const Tensor& vv = v.value();
  if (av.rank() != 3 || vv.rank() != 2 || vv.dim(0) != av.dim(0) || vv.dim(1) != av.dim(2))
    throw DimensionError("scale_columns", av.shape(), vv.shape());
  Tensor out = av;
  for (std::size_t i = 0; i < av.dim(0); ++i)
    out.slice(i).array().rowwise() *= vv.mat().row(static_cast<Eigen::Index>(i)).array();
  return a.tape().record(std::move(out), {a, v}, [a, v](Tape& t, const Var& self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& av = a.value();
    const Tensor& vv = v.value();
    push_to(t, a, [&](Tensor& ga) {
      for (std::size_t i = 0; i < g.dim(0); ++i)
        ga.slice(i).array() += g.slice(i).array().rowwise() * vv.mat().row(static_cast<Eigen::Index>(i)).array();
    });
    push_to(t, v, [&](Tensor& gv) {
      for (std::size_t i = 0; i < g.dim(0); ++i)
        gv.mat().row(static_cast<Eigen::Index>(i)) += (g.slice(i).array() * av.slice(i).array()).colwise().sum().matrix();
    });
  });
}

Var detach(const Var& a) { return a.tape().constant(a.value()); }

}  // namespace lvrnn::num
