#include "lvrnn/num/tape.hpp"

namespace lvrnn::num {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() of an unbound Var");
  return tape_->value(*this);
}

const Tape::Node& Tape::node(const Var& v) const {
  if (&v.tape() != this) throw ContractError("Var belongs to a different tape");
  return nodes_.at(v.id());
}

Tape::Node& Tape::node(const Var& v) {
  if (&v.tape() != this) throw ContractError("Var belongs to a different tape");
  return nodes_.at(v.id());
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(Node{std::move(value), {}, {}, false}); }

Var Tape::parameter(Tensor value) { return push(Node{std::move(value), {}, {}, recording_}); }

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  if (recording_) {
    for (const Var& p : parents) needs = needs || node(p).requires_grad;
  }
  Node n{std::move(value), {}, {}, needs};
  if (needs) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor& Tape::adjoint(const Var& v) {
  Node& n = node(v);
  if (n.adjoint.empty() && !n.value.empty()) n.adjoint = Tensor(n.value.shape());
  return n.adjoint;
}

std::vector<Tensor> Tape::grad(const Var& output, std::span<const Var> wrt) {
  Node& out = node(output);
  if (out.value.size() != 1) {
    throw ContractError("grad: output must be scalar, got shape " + shape_string(out.value.shape()));
  }
  for (Node& n : nodes_) n.adjoint = Tensor();
  std::vector<Tensor> result;
  result.reserve(wrt.size());
  if (out.requires_grad) {
    out.adjoint = Tensor::filled(out.value.shape(), 1.0);
    for (std::size_t i = output.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.adjoint.empty()) continue;
      n.backward(*this, Var(this, i));
    }
  }
  for (const Var& w : wrt) {
    const Node& n = node(w);
    result.push_back(n.adjoint.empty() ? Tensor(n.value.shape()) : n.adjoint);
  }
  return result;
}

}  // namespace lvrnn::num
