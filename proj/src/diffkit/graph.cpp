#include "mfplan/diffkit/graph.hpp"

#include <algorithm>

namespace mfplan::diffkit {

Graph& Var::graph() const {
  if (!graph_) throw GraphError("use of an unbound Var");
  return *graph_;
}

const Tensor& Var::value() const { return graph().nodes_[id_].value; }

bool Var::has_tangent() const { return graph().nodes_[id_].tangent.has_value(); }

const Tensor& Var::tangent() const {
  const auto& node = graph().nodes_[id_];
  if (!node.tangent) throw GraphError("Var carries no tangent");
  return *node.tangent;
}

bool Var::requires_grad() const { return graph().nodes_[id_].requires_grad; }

Graph::Graph(const ParamStore* params, bool record_backward) : params_(params), record_(record_backward) {}

Var Graph::push(const char* op, Tensor value, std::optional<Tensor> tangent, bool requires_grad,
                Backward backward) {
  value.require_finite(op);
  if (tangent) {
    if (tangent->shape() != value.shape()) {
      throw ShapeError(std::string(op) + ": tangent shape " + to_string(tangent->shape()) +
                       " differs from value shape " + to_string(value.shape()));
    }
    tangent->require_finite(op);
  }
  Node node;
  node.value = std::move(value);
  node.tangent = std::move(tangent);
  node.requires_grad = record_ && requires_grad;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) { return push("constant", std::move(value), std::nullopt, false, nullptr); }

Var Graph::input(Tensor value, std::optional<Tensor> tangent, bool requires_grad) {
  return push("input", std::move(value), std::move(tangent), requires_grad, nullptr);
}

Var Graph::param(const std::string& name) {
  if (!params_) throw GraphError("graph has no parameter store");
  const std::size_t slot = params_->index_of(name);
  if (auto it = param_nodes_.find(slot); it != param_nodes_.end()) return Var(this, it->second);
  Var v = push("param", params_->slot(slot).value, std::nullopt, true, nullptr);
  param_nodes_.emplace(slot, v.id());
  param_leaves_.emplace_back(v.id(), slot);
  return v;
}

Var Graph::emit(const char* op, Tensor value, std::optional<Tensor> tangent, std::initializer_list<Var> inputs,
                Backward backward) {
  bool rg = false;
  for (const auto& in : inputs) {
    if (&in.graph() != this) throw GraphError(std::string(op) + ": operands from different graphs");
    rg = rg || nodes_[in.id()].requires_grad;
  }
  return push(op, std::move(value), std::move(tangent), rg, std::move(backward));
}

Var Graph::emit(const char* op, Tensor value, std::optional<Tensor> tangent, const std::vector<Var>& inputs,
                Backward backward) {
  bool rg = false;
  for (const auto& in : inputs) {
    if (&in.graph() != this) throw GraphError(std::string(op) + ": operands from different graphs");
    rg = rg || nodes_[in.id()].requires_grad;
  }
  return push(op, std::move(value), std::move(tangent), rg, std::move(backward));
}

bool Graph::needs_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

std::span<double> Graph::grad_buffer(const Var& v) {
  auto& node = nodes_[v.id()];
  if (!node.grad) node.grad.emplace(node.value.shape());
  return node.grad->data();
}

void Graph::backward(const Var& loss) {
  if (&loss.graph() != this) throw GraphError("backward: loss belongs to another graph");
  if (!record_) throw GraphError("backward: graph was built without recording");
  auto& root = nodes_[loss.id()];
  if (root.value.size() != 1) throw ShapeError("backward: loss must be scalar, got " + to_string(root.value.shape()));
  for (auto& n : nodes_) n.grad.reset();
  if (!root.requires_grad) return;
  root.grad.emplace(root.value.shape(), 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad && node.backward) node.backward(*this, *node.grad);
  }
}

const Tensor* Graph::grad(const Var& v) const { return grad_at(v.id()); }

const Tensor* Graph::grad_at(std::size_t id) const {
  const auto& node = nodes_[id];
  return node.grad ? &*node.grad : nullptr;
}

void backward(const Var& loss, ParamStore& params, bool accumulate) {
  Graph& g = loss.graph();
  if (g.params() != &params) throw GraphError("backward: graph bound to a different parameter store");
  g.backward(loss);
  if (!accumulate) params.zero_grad();
  for (const auto& [node_id, slot_index] : g.param_leaves()) {
    const Tensor* grad = g.grad_at(node_id);
    if (!grad) continue;
    auto& slot = params.slot(slot_index);
    for (std::size_t i = 0; i < grad->size(); ++i) slot.grad[i] += (*grad)[i];
    slot.has_grad = true;
  }
}

}  // namespace mfplan::diffkit
