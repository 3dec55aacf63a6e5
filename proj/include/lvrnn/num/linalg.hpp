#pragma once

#include "lvrnn/num/tensor.hpp"

namespace lvrnn::num {

/// Standard matrix product. Throws DimensionError naming both shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, double s);

/// Lower-triangular L with L Lᵀ = a. Throws NotPositiveDefinite with the
/// failing pivot index.
Tensor cholesky(const Tensor& a);

/// Solves L x = b (forward) and Lᵀ x = b (backward) for lower-triangular L.
Tensor solve_lower(const Tensor& lower, const Tensor& b);
Tensor solve_lower_transposed(const Tensor& lower, const Tensor& b);

/// ln det(a) of an SPD matrix through its Cholesky diagonal.
double log_det_spd(const Tensor& a);
/// Inverse of an SPD matrix through its Cholesky factor.
Tensor inverse_spd(const Tensor& a);
/// General inverse via partial-pivot LU. Throws if numerically singular.
Tensor inverse(const Tensor& a);

double frobenius_norm(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool is_symmetric(const Tensor& a, double tol);

}  // namespace lvrnn::num
