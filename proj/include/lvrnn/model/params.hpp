#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lvrnn/model/config.hpp"
#include "lvrnn/num/tensor.hpp"

namespace lvrnn::model {

using num::Shape;
using num::Tensor;

/// Named parameter tensors in a fixed order.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Tensor> values;

  std::size_t size() const { return values.size(); }
  /// Total number of scalars.
  std::size_t count() const;
  /// Index of `name`; throws std::out_of_range if missing.
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const;
  bool all_finite() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t fan_in;
};

/// Width of the VRNN posterior head output: mean, log-eigenvalues and (full
/// covariance only) the strictly lower triangle of the Cayley generator.
std::size_t posterior_head_width(std::size_t latent_dim, CovarianceKind kind);

/// Parameter layout for an architecture. The posterior head is appended last
/// when `vrnn_kind` is set.
std::vector<ParamSpec> param_layout(const Architecture& arch, std::optional<CovarianceKind> vrnn_kind);

/// Uniform(-a, a) with a = 1/sqrt(fan_in), drawn in layout order.
ParamSet init_params(const std::vector<ParamSpec>& layout, std::uint64_t seed);

}  // namespace lvrnn::model
