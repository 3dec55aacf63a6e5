#include "lvrnn/belief/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lvrnn/num/linalg.hpp"

namespace lvrnn::belief {

using num::DimensionError;
using num::RowMatrix;

std::string to_string(CovarianceKind kind) { return kind == CovarianceKind::Full ? "full" : "diagonal"; }

CovarianceKind covariance_kind_from_string(const std::string& s) {
  if (s == "full") return CovarianceKind::Full;
  if (s == "diagonal") return CovarianceKind::Diagonal;
  throw std::invalid_argument("unknown covariance kind '" + s + "' (expected full|diagonal)");
}

PrecisionMatrix PrecisionMatrix::full(Tensor m) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1)) throw DimensionError("full precision must be square", m.shape(), m.shape());
  PrecisionMatrix p;
  p.kind_ = CovarianceKind::Full;
  p.dim_ = m.dim(0);
  p.values_ = std::move(m);
  return p;
}

PrecisionMatrix PrecisionMatrix::diagonal(Tensor d) {
  if (d.rank() != 1) throw DimensionError("diagonal precision must be a vector", d.shape(), d.shape());
  PrecisionMatrix p;
  p.kind_ = CovarianceKind::Diagonal;
  p.dim_ = d.size();
  p.values_ = std::move(d);
  return p;
}

PrecisionMatrix PrecisionMatrix::scaled_identity(std::size_t dim, double s, CovarianceKind kind) {
  if (kind == CovarianceKind::Diagonal) return diagonal(Tensor::filled({dim}, s));
  return full(num::scaled(Tensor::identity(dim), s));
}

Tensor PrecisionMatrix::dense() const {
  if (kind_ == CovarianceKind::Full) return values_;
  Tensor m({dim_, dim_});
  for (std::size_t i = 0; i < dim_; ++i) m(i, i) = values_[i];
  return m;
}

PrecisionMatrix operator+(const PrecisionMatrix& a, const PrecisionMatrix& b) {
  if (a.kind_ != b.kind_) throw std::invalid_argument("cannot add precisions of different kinds");
  if (a.dim_ != b.dim_) throw DimensionError("precision add", a.values_.shape(), b.values_.shape());
  PrecisionMatrix out = a;
  out.values_.vec() += b.values_.vec();
  return out;
}

GaussianBelief prior_belief(const Tensor& mean, CovarianceKind kind) {
  return {mean, PrecisionMatrix::scaled_identity(mean.size(), kPriorPrecision, kind)};
}

PrecisionMatrix laplace_precision(std::span<const Tensor> jacobians, std::size_t dim, CovarianceKind kind, double eps) {
  RowMatrix acc = RowMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (const Tensor& j : jacobians) {
    const std::size_t cols = j.rank() == 2 ? j.dim(1) : j.size();
    if (cols != dim) throw DimensionError("laplace_precision: jacobian state dimension", j.shape(), {dim});
    const auto rows = static_cast<Eigen::Index>(j.rank() == 2 ? j.dim(0) : 1);
    num::ConstMatrixMap jm(j.data().data(), rows, static_cast<Eigen::Index>(dim));
    if (kind == CovarianceKind::Full) {
      acc.selfadjointView<Eigen::Lower>().rankUpdate(jm.transpose());
    } else {
      diag += jm.colwise().squaredNorm().transpose();
    }
  }
  if (kind == CovarianceKind::Diagonal) {
    diag.array() += eps;
    return PrecisionMatrix::diagonal(Tensor::from_vector(diag));
  }
  // rankUpdate fills the lower triangle only; mirror it for exact symmetry.
  acc.triangularView<Eigen::StrictlyUpper>() = acc.transpose();
  acc.diagonal().array() += eps;
  return PrecisionMatrix::full(Tensor::from_eigen(acc));
}

GaussianBelief convolve(const GaussianBelief& a, const GaussianBelief& b) {
  if (a.mean.shape() != b.mean.shape()) throw DimensionError("convolve", a.mean.shape(), b.mean.shape());
  GaussianBelief out{a.mean, a.precision + b.precision};
  out.mean.vec() += b.mean.vec();
  return out;
}

namespace {

double log_det(const PrecisionMatrix& p) {
  if (p.kind() == CovarianceKind::Diagonal) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.dim(); ++i) {
      if (!(p.values()[i] > 0.0)) throw num::NotPositiveDefinite(i, p.values()[i]);
      s += std::log(p.values()[i]);
    }
    return s;
  }
  return num::log_det_spd(p.values());
}

}  // namespace

double kl(const GaussianBelief& q, const GaussianBelief& p) {
  if (q.dim() != p.dim()) throw DimensionError("kl", q.mean.shape(), p.mean.shape());
  const auto d = static_cast<double>(q.dim());
  const Eigen::VectorXd diff = p.mean.vec() - q.mean.vec();
  double trace = 0.0;
  double quad = 0.0;
  if (q.precision.kind() == CovarianceKind::Diagonal && p.precision.kind() == CovarianceKind::Diagonal) {
    const auto lq = q.precision.values().vec().array();
    const auto lp = p.precision.values().vec().array();
    trace = (lp / lq).sum();
    quad = (diff.array().square() * lp).sum();
  } else {
    const Tensor lp = p.precision.dense();
    const Tensor cov_q = num::inverse_spd(q.precision.dense());
    trace = (lp.mat().array() * cov_q.mat().array()).sum();
    quad = diff.dot(lp.mat() * diff);
  }
  // ln det Σp − ln det Σq = ln det Λq − ln det Λp
  const double value = 0.5 * (trace + quad - d + log_det(q.precision) - log_det(p.precision));
  return value;
}

double entropy(const GaussianBelief& q) {
  const auto d = static_cast<double>(q.dim());
  return 0.5 * (d * std::log(2.0 * std::numbers::pi * std::numbers::e) - log_det(q.precision));
}

double log_density(const GaussianBelief& q, const Tensor& z) {
  if (z.shape() != q.mean.shape()) throw DimensionError("log_density", q.mean.shape(), z.shape());
  const Eigen::VectorXd diff = z.vec() - q.mean.vec();
  double quad = 0.0;
  if (q.precision.kind() == CovarianceKind::Diagonal) {
    quad = (diff.array().square() * q.precision.values().vec().array()).sum();
  } else {
    quad = diff.dot(q.precision.values().mat() * diff);
  }
  const auto d = static_cast<double>(q.dim());
  return 0.5 * (log_det(q.precision) - d * std::log(2.0 * std::numbers::pi) - quad);
}

Tensor covariance(const GaussianBelief& q) {
  if (q.precision.kind() == CovarianceKind::Diagonal) {
    Tensor c({q.dim(), q.dim()});
    for (std::size_t i = 0; i < q.dim(); ++i) c(i, i) = 1.0 / q.precision.values()[i];
    return c;
  }
  return num::inverse_spd(q.precision.values());
}

Tensor sample_noise(const PrecisionMatrix& precision, std::span<const double> standard_normal) {
  const std::size_t d = precision.dim();
  if (standard_normal.size() != d) throw DimensionError("sample_noise", {d}, {standard_normal.size()});
  Tensor u({d}, std::vector<double>(standard_normal.begin(), standard_normal.end()));
  if (precision.kind() == CovarianceKind::Diagonal) {
    for (std::size_t i = 0; i < d; ++i) {
      const double lam = precision.values()[i];
      if (!(lam > 0.0)) throw num::NotPositiveDefinite(i, lam);
      u[i] /= std::sqrt(lam);
    }
    return u;
  }
  const Tensor l = num::cholesky(precision.values());
  return num::solve_lower_transposed(l, u);
}

std::vector<Tensor> sample(const GaussianBelief& q, std::mt19937_64& rng, std::size_t k) {
  if (k < 1) throw num::ContractError("sample: k must be >= 1");
  const std::size_t d = q.dim();
  std::normal_distribution<double> normal;
  std::vector<Tensor> out;
  out.reserve(k);
  Tensor l;
  if (q.precision.kind() == CovarianceKind::Full) l = num::cholesky(q.precision.values());
  std::vector<double> u(d);
  for (std::size_t s = 0; s < k; ++s) {
    for (double& v : u) v = normal(rng);
    Tensor z;
    if (q.precision.kind() == CovarianceKind::Full) {
      z = num::solve_lower_transposed(l, Tensor({d}, u));
    } else {
      z = sample_noise(q.precision, u);
    }
    z.vec() += q.mean.vec();
    out.push_back(std::move(z));
  }
  return out;
}

Tensor cayley_orthogonal(const Tensor& lower_tri) {
  if (lower_tri.rank() != 2 || lower_tri.dim(0) != lower_tri.dim(1))
    throw DimensionError("cayley_orthogonal", lower_tri.shape(), lower_tri.shape());
  const auto d = static_cast<Eigen::Index>(lower_tri.dim(0));
  RowMatrix l = lower_tri.mat().triangularView<Eigen::StrictlyLower>();
  const RowMatrix a = l - l.transpose();
  const RowMatrix eye = RowMatrix::Identity(d, d);
  Eigen::PartialPivLU<RowMatrix> lu(eye + a);
  if (!(lu.rcond() > 1e-14)) throw std::runtime_error("cayley_orthogonal: I + A is numerically singular");
  return Tensor::from_eigen(RowMatrix((eye - a) * lu.inverse()));
}

GaussianBelief cayley_gaussian(const SpectralCovarianceParams& params) {
  const std::size_t d = params.mu.size();
  if (params.log_eigs.size() != d) throw DimensionError("cayley_gaussian log_eigs", params.mu.shape(), params.log_eigs.shape());
  const Tensor u = cayley_orthogonal(params.lower_tri);
  if (u.dim(0) != d) throw DimensionError("cayley_gaussian lower_tri", params.mu.shape(), params.lower_tri.shape());
  const Eigen::VectorXd inv_eigs = (-params.log_eigs.vec().array()).exp();
  RowMatrix prec = u.mat() * inv_eigs.asDiagonal() * u.mat().transpose();
  prec = 0.5 * (prec + prec.transpose()).eval();
  return {params.mu, PrecisionMatrix::full(Tensor::from_eigen(prec))};
}

}  // namespace lvrnn::belief
