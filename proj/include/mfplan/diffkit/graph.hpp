#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfplan/diffkit/params.hpp"
#include "mfplan/diffkit/tensor.hpp"

namespace mfplan::diffkit {

class Graph;

/// Misuse of the tape: unbound handles, mixed graphs, sweeps without recording.
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Handle to a value recorded in a Graph. Cheap to copy; valid while the
/// owning Graph lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return graph_ != nullptr; }
  Graph& graph() const;
  std::size_t id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool has_tangent() const;
  /// Forward-mode tangent carried alongside the value.
  const Tensor& tangent() const;
  bool requires_grad() const;

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape of primitive evaluations.
///
/// Every node carries its primal value and, when any input carries one, a
/// forward-mode tangent computed eagerly at creation. Reverse-mode uses the
/// recorded backward closures; tangents never receive gradients, so a target
/// built from tangents is detached by construction.
class Graph {
 public:
  using Backward = std::function<void(Graph&, const Tensor& out_grad)>;

  explicit Graph(const ParamStore* params = nullptr, bool record_backward = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var input(Tensor value, std::optional<Tensor> tangent = std::nullopt, bool requires_grad = false);
  /// Leaf bound to a named parameter; repeated calls return the same node.
  Var param(const std::string& name);

  const ParamStore* params() const { return params_; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Primitive implementation interface.
  Var emit(const char* op, Tensor value, std::optional<Tensor> tangent, std::initializer_list<Var> inputs,
           Backward backward);
  Var emit(const char* op, Tensor value, std::optional<Tensor> tangent, const std::vector<Var>& inputs,
           Backward backward);
  bool needs_grad(const Var& v) const;
  /// Gradient accumulator for `v`, zero-initialized on first access.
  std::span<double> grad_buffer(const Var& v);

  /// Reverse sweep from a scalar loss; clears gradients from earlier sweeps.
  void backward(const Var& loss);
  /// Gradient reached at `v` by the last sweep, or nullptr.
  const Tensor* grad(const Var& v) const;
  const Tensor* grad_at(std::size_t node_id) const;

  /// Parameter leaves in creation order: (node id, parameter slot index).
  const std::vector<std::pair<std::size_t, std::size_t>>& param_leaves() const { return param_leaves_; }

 private:
  friend class Var;
  struct Node {
    Tensor value;
    std::optional<Tensor> tangent;
    std::optional<Tensor> grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var push(const char* op, Tensor value, std::optional<Tensor> tangent, bool requires_grad, Backward backward);

  const ParamStore* params_;
  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<std::size_t, std::size_t> param_nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> param_leaves_;
};

/// Fills `params` gradients with d(loss)/d(param) for every parameter the
/// loss reaches. Without `accumulate` all gradients are reset first, so
/// parameters the loss does not reach end with has_grad == false.
void backward(const Var& loss, ParamStore& params, bool accumulate = false);

}  // namespace mfplan::diffkit
