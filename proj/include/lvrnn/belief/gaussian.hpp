#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "lvrnn/num/tensor.hpp"

namespace lvrnn::belief {

using num::Tensor;

enum class CovarianceKind { Full, Diagonal };

std::string to_string(CovarianceKind kind);
CovarianceKind covariance_kind_from_string(const std::string& s);

/// Jitter added to every Laplace precision so it stays sampleable.
inline constexpr double kLaplaceJitter = 1e-6;
/// Precision of the belief before any observation has been made.
inline constexpr double kPriorPrecision = 1e-3;

/// Inverse covariance, stored dense (d x d) or as its diagonal (d).
class PrecisionMatrix {
 public:
  PrecisionMatrix() = default;
  static PrecisionMatrix full(Tensor m);
  static PrecisionMatrix diagonal(Tensor d);
  /// s * I in the requested representation.
  static PrecisionMatrix scaled_identity(std::size_t dim, double s, CovarianceKind kind);
  static PrecisionMatrix zeros(std::size_t dim, CovarianceKind kind) { return scaled_identity(dim, 0.0, kind); }

  CovarianceKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  /// d x d matrix for Full, length-d vector for Diagonal.
  const Tensor& values() const noexcept { return values_; }
  Tensor dense() const;

  friend PrecisionMatrix operator+(const PrecisionMatrix& a, const PrecisionMatrix& b);
  friend bool operator==(const PrecisionMatrix&, const PrecisionMatrix&) = default;

 private:
  CovarianceKind kind_ = CovarianceKind::Full;
  std::size_t dim_ = 0;
  Tensor values_;
};

/// Gaussian over the latent task variable, parameterized by mean and precision.
struct GaussianBelief {
  Tensor mean;
  PrecisionMatrix precision;

  std::size_t dim() const { return mean.size(); }
  friend bool operator==(const GaussianBelief&, const GaussianBelief&) = default;
};

/// Belief before any observation: the given mean with precision kPriorPrecision * I.
GaussianBelief prior_belief(const Tensor& mean, CovarianceKind kind);

/// Σᵢ JᵢᵀJᵢ + eps * I, where each Jᵢ is [out x dim] (or a length-dim row).
/// The Diagonal kind keeps the diagonal of the same sum. An empty list gives eps * I.
PrecisionMatrix laplace_precision(std::span<const Tensor> jacobians, std::size_t dim, CovarianceKind kind,
                                  double eps = kLaplaceJitter);

/// Gaussian convolution: means add and precisions add.
GaussianBelief convolve(const GaussianBelief& a, const GaussianBelief& b);

/// Closed-form KL(q || p).
double kl(const GaussianBelief& q, const GaussianBelief& p);
/// Differential entropy 0.5 ln det(2πe Σ).
double entropy(const GaussianBelief& q);
double log_density(const GaussianBelief& q, const Tensor& z);
Tensor covariance(const GaussianBelief& q);

/// Noise term L⁻ᵀu (Full) or u/√λ (Diagonal) for standard-normal u; a sample is mean + noise.
Tensor sample_noise(const PrecisionMatrix& precision, std::span<const double> standard_normal);
std::vector<Tensor> sample(const GaussianBelief& q, std::mt19937_64& rng, std::size_t k);

/// Spectral covariance parameters: Σ = U exp(S) Uᵀ with U the Cayley transform
/// of the skew matrix built from the strictly-lower part of `lower_tri`.
struct SpectralCovarianceParams {
  Tensor mu;         // [d]
  Tensor log_eigs;   // [d], the diagonal of S
  Tensor lower_tri;  // [d x d], only strictly-lower entries are read
};

/// U = (I - A)(I + A)⁻¹ with A = L - Lᵀ.
Tensor cayley_orthogonal(const Tensor& lower_tri);
GaussianBelief cayley_gaussian(const SpectralCovarianceParams& params);

}  // namespace lvrnn::belief
