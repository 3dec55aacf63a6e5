#include "lvrnn/num/linalg.hpp"

#include <cmath>

namespace lvrnn::num {

namespace {
void require_square(const char* op, const Tensor& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw DimensionError(op, a.shape(), a.shape());
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) throw DimensionError("matmul", a.shape(), b.shape());
  Tensor out({a.dim(0), b.dim(1)});
  out.mat().noalias() = a.mat() * b.mat();
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose", a.shape(), a.shape());
  Tensor out({a.dim(1), a.dim(0)});
  out.mat() = a.mat().transpose();
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("add", a.shape(), b.shape());
  Tensor out = a;
  out.vec() += b.vec();
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("sub", a.shape(), b.shape());
  Tensor out = a;
  out.vec() -= b.vec();
  return out;
}

Tensor scaled(const Tensor& a, double s) {
  Tensor out = a;
  out.vec() *= s;
  return out;
}

Tensor cholesky(const Tensor& a) {
  require_square("cholesky", a);
  const std::size_t n = a.dim(0);
  Tensor l({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefinite(j, d);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Tensor solve_lower(const Tensor& lower, const Tensor& b) {
  require_square("solve_lower", lower);
  if (b.dim(0) != lower.dim(0)) throw DimensionError("solve_lower", lower.shape(), b.shape());
  Tensor x = b;
  lower.mat().triangularView<Eigen::Lower>().solveInPlace(x.mat());
  return x;
}

Tensor solve_lower_transposed(const Tensor& lower, const Tensor& b) {
  require_square("solve_lower_transposed", lower);
  if (b.dim(0) != lower.dim(0)) throw DimensionError("solve_lower_transposed", lower.shape(), b.shape());
  Tensor x = b;
  lower.mat().transpose().triangularView<Eigen::Upper>().solveInPlace(x.mat());
  return x;
}

double log_det_spd(const Tensor& a) {
  const Tensor l = cholesky(a);
  double s = 0.0;
  for (std::size_t i = 0; i < l.dim(0); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Tensor inverse_spd(const Tensor& a) {
  const Tensor l = cholesky(a);
  const Tensor y = solve_lower(l, Tensor::identity(a.dim(0)));
  Tensor inv = solve_lower_transposed(l, y);
  // Symmetrize away round-off.
  inv.mat() = 0.5 * (inv.mat() + inv.mat().transpose()).eval();
  return inv;
}

Tensor inverse(const Tensor& a) {
  require_square("inverse", a);
  Eigen::PartialPivLU<RowMatrix> lu(a.mat());
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) throw std::runtime_error("inverse: matrix is numerically singular (rcond " + std::to_string(rcond) + ")");
  return Tensor::from_eigen(RowMatrix(lu.inverse()));
}

double frobenius_norm(const Tensor& a) { return a.vec().norm(); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("max_abs_diff", a.shape(), b.shape());
  return (a.vec() - b.vec()).cwiseAbs().maxCoeff();
}

bool is_symmetric(const Tensor& a, double tol) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) return false;
  return (a.mat() - a.mat().transpose()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace lvrnn::num
