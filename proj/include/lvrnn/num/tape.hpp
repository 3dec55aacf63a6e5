#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "lvrnn/num/tensor.hpp"

namespace lvrnn::num {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape.
///
/// Values are appended in evaluation order. Each recorded value keeps a
/// closure that pushes its adjoint to its parents; `grad` replays these
/// closures in exact reverse recording order. A tape constructed with
/// `record_gradients = false` only evaluates: no value requires a gradient
/// and no closures are kept.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Var& self)>;

  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Registers a parameter slot: a leaf whose gradient `grad` can return.
  Var parameter(Tensor value);
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
  Var record(Tensor value, std::span<const Var> parents, Backward backward);

  bool recording() const noexcept { return recording_; }
  bool requires_grad(const Var& v) const { return node(v).requires_grad; }
  const Tensor& value(const Var& v) const { return node(v).value; }

  /// Adjoint buffer of `v`, zero-initialized on first access. Only meaningful
  /// inside a backward pass.
  Tensor& adjoint(const Var& v);

  /// d(output)/d(wrt[i]) for every slot. `output` must hold exactly one value.
  std::vector<Tensor> grad(const Var& output, std::span<const Var> wrt);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor adjoint;
    Backward backward;
    bool requires_grad = false;
  };

  const Node& node(const Var& v) const;
  Node& node(const Var& v);
  Var push(Node n);

  std::deque<Node> nodes_;
  bool recording_;
};

}  // namespace lvrnn::num
