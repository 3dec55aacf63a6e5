#include "lvrnn/num/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lvrnn::num {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

DimensionError::DimensionError(const std::string& op, const Shape& a, const Shape& b)
    : std::invalid_argument(op + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b)) {}

NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot, double value)
    : std::runtime_error("matrix is not positive definite: pivot " + std::to_string(pivot) + " = " +
                         std::to_string(value)),
      pivot_(pivot) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_string(shape_));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::filled(Shape shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), v);
  return t;
}

Tensor Tensor::from_eigen(const Eigen::Ref<const RowMatrix>& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.mat() = m;
  return t;
}

Tensor Tensor::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Tensor t({static_cast<std::size_t>(v.size())});
  t.vec() = v;
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) throw DimensionError("reshape", shape_, shape);
  return Tensor(std::move(shape), data_);
}

namespace {
std::pair<Eigen::Index, Eigen::Index> matrix_dims(const Shape& s) {
  if (s.size() == 2) return {static_cast<Eigen::Index>(s[0]), static_cast<Eigen::Index>(s[1])};
  if (s.size() == 1) return {static_cast<Eigen::Index>(s[0]), 1};
  throw DimensionError("matrix view of tensor with shape " + shape_string(s));
}
}  // namespace

ConstMatrixMap Tensor::mat() const {
  auto [r, c] = matrix_dims(shape_);
  return {data_.data(), r, c};
}

MatrixMap Tensor::mat() {
  auto [r, c] = matrix_dims(shape_);
  return {data_.data(), r, c};
}

ConstMatrixMap Tensor::slice(std::size_t b) const {
  if (shape_.size() != 3) throw DimensionError("batch slice of tensor with shape " + shape_string(shape_));
  const auto r = static_cast<Eigen::Index>(shape_[1]);
  const auto c = static_cast<Eigen::Index>(shape_[2]);
  return {data_.data() + b * shape_[1] * shape_[2], r, c};
}

MatrixMap Tensor::slice(std::size_t b) {
  if (shape_.size() != 3) throw DimensionError("batch slice of tensor with shape " + shape_string(shape_));
  const auto r = static_cast<Eigen::Index>(shape_[1]);
  const auto c = static_cast<Eigen::Index>(shape_[2]);
  return {data_.data() + b * shape_[1] * shape_[2], r, c};
}

}  // namespace lvrnn::num
