#pragma once

#include <span>
#include <vector>

#include "lvrnn/num/tape.hpp"

// Differentiable primitives over Var. Every op records its result on the
// operands' tape; shape mismatches raise DimensionError.
namespace lvrnn::num {

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// a [m x n] + bias [n], broadcast over rows.
Var add_bias(const Var& a, const Var& bias);
/// a [m x n] * v [m], each row i scaled by v[i].
Var scale_rows(const Var& a, const Var& v);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.01);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
/// Elementwise clamp; gradient is zero outside [lo, hi].
Var clamp(const Var& a, double lo, double hi);
/// Elementwise minimum; ties send the gradient to `a`.
Var minimum(const Var& a, const Var& b);

Var sum(const Var& a);
Var mean(const Var& a);
/// [m x n] -> [m]
Var row_sum(const Var& a);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var reshape(const Var& a, Shape shape);
Var transpose(const Var& a);

/// Row-wise log-softmax of [m x n].
Var log_softmax(const Var& a);
/// out[i] = a[i, index[i]].
Var pick(const Var& a, std::span<const std::size_t> index);

/// Batched matrix ops over rank-3 tensors [B x m x n].
Var bmm(const Var& a, const Var& b);
Var batch_transpose(const Var& a);
Var batch_inverse(const Var& a);
/// out[b,i,j] = a[b,i,j] * v[b,j]
Var scale_columns(const Var& a, const Var& v);

/// Stop-gradient: same value, zero adjoint to the argument.
Var detach(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return neg(a); }

}  // namespace lvrnn::num
