#pragma once

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpc/tensor.hpp"

namespace dpc {

// Named trainable tensor. Models own their Params; a Graph references them by
// address, so a Param must outlive every graph it is registered with.
struct Param {
  std::string name;
  Tensor value;
};

struct Var {
  int id = -1;
};

// Per-parameter gradients produced by Graph::backward. Every parameter
// registered with the graph has an entry; parameters the loss does not reach
// get zero tensors of matching shape.
class GradientMap {
 public:
  const Tensor& at(const Param& p) const;
  bool contains(const Param& p) const { return grads_.count(&p) != 0; }
  size_t size() const { return grads_.size(); }

 private:
  friend class Graph;
  std::unordered_map<const Param*, Tensor> grads_;
};

// Recorded operation tape for reverse-mode differentiation. A graph is built
// fresh for each forward evaluation (the unrolled closed loop is a finite
// DAG), backward is run once, and the graph is discarded. Construction and
// backward are single-threaded per instance.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // leaf with no gradient tracking
  Var constant(Tensor v);
  // trainable leaf; repeated registration of the same Param returns the same
  // node so adjoints from all uses accumulate on one leaf
  Var param(const Param& p);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);        // b may be a column broadcast across a's columns
  Var sub(Var a, Var b);        // same broadcast rule
  Var hadamard(Var a, Var b);   // same broadcast rule
  Var concat_rows(std::span<const Var> parts);
  Var slice_rows(Var t, int start, int len);

  Var relu(Var t);
  Var gelu(Var t);     // tanh approximation, see graph.cpp for the constants
  Var sigmoid(Var t);
  Var softplus(Var t);
  Var softmax_rows(Var t);
  Var affine(Var t, double a, double b);  // a*x + b elementwise

  Var mean(Var t);
  Var sum_squares(Var t);

  const Tensor& value(Var v) const;
  int node_count() const { return static_cast<int>(nodes_.size()); }

  // Reverse pass from a scalar loss. Visits nodes exactly once in reverse
  // topological order; accumulation follows fixed index order, so results are
  // deterministic.
  GradientMap backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first adjoint contribution
    std::function<void(Graph&)> backprop;
    const Param* param = nullptr;
  };

  Var push(Tensor value, std::function<void(Graph&)> backprop);
  const Tensor& val(Var v) const { return nodes_[check(v)].value; }
  int check(Var v) const;
  Tensor& grad_buf(int id);
  bool has_grad(int id) const { return nodes_[id].grad.rows() > 0; }
  void add_grad(int id, const Tensor& g);

  std::vector<Node> nodes_;
  std::unordered_map<const Param*, int> param_nodes_;
  std::vector<const Param*> registered_;
};

}  // namespace dpc
