#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <utility>

#include "hiasa/ndcore/tensor.hpp"

namespace hiasa::nd {

class Graph;

/// Handle to a node recorded on a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const;
};

/// Tape of forward operations. Leaves are either owned constants or
/// references to external parameters; backward replays the tape in reverse
/// and accumulates gradients into every leaf that requires them.
class Graph {
 public:
  explicit Graph(bool training = false, std::uint64_t seed = 0)
      : training_(training), rng_(seed) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const noexcept { return training_; }
  std::mt19937_64& rng() noexcept { return rng_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  Var constant(Tensor t) {
    nodes_.push_back(Node{std::move(t), nullptr, false, {}, "constant"});
    return {this, nodes_.size() - 1};
  }

  /// Registers an external tensor as a leaf. Its grad buffer receives the
  /// accumulated gradient on backward when it requires grad.
  Var param(Tensor& p) {
    if (p.requires_grad()) p.ensure_grad();
    nodes_.push_back(Node{Tensor{}, &p, p.requires_grad(), {}, "param"});
    return {this, nodes_.size() - 1};
  }

  /// Records an operation result. `back` is invoked during backward with
  /// the output node id once the output gradient is populated.
  Var record(Tensor value, bool needs_grad, std::function<void(std::size_t)> back,
             const char* op) {
    if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
    if (needs_grad) value.ensure_grad();
    nodes_.push_back(Node{std::move(value), nullptr, needs_grad,
                          needs_grad ? std::move(back) : std::function<void(std::size_t)>{}, op});
    return {this, nodes_.size() - 1};
  }

  Tensor& tensor(std::size_t id) {
    Node& n = nodes_[id];
    return n.external ? *n.external : n.owned;
  }
  const Tensor& tensor(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.owned;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Gradient buffer of a node that requires grad.
  std::span<double> grad(std::size_t id) { return tensor(id).grad(); }

  void backward(Var root) {
    if (root.graph != this) throw std::invalid_argument("backward: variable from another graph");
    Tensor& r = tensor(root.id);
    if (r.size() != 1) throw ShapeError("backward: root must be scalar, got " + to_string(r.shape()));
    if (!nodes_[root.id].needs_grad) return;
    r.grad()[0] += 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.back) n.back(i);
    }
  }

 private:
  struct Node {
    Tensor owned;
    Tensor* external;
    bool needs_grad;
    std::function<void(std::size_t)> back;
    const char* op;
  };

  std::deque<Node> nodes_;
  bool training_;
  std::mt19937_64 rng_;
};

inline const Tensor& Var::value() const { return graph->tensor(id); }
inline double Var::item() const {
  const Tensor& t = value();
  if (t.size() != 1) throw ShapeError("item() on non-scalar " + to_string(t.shape()));
  return t[0];
}

}  // namespace hiasa::nd
