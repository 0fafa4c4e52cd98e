#include "dpc/graph.hpp"

#include <cmath>

#include "dpc/errors.hpp"

namespace dpc {

const Tensor& GradientMap::at(const Param& p) const {
  auto it = grads_.find(&p);
  if (it == grads_.end()) throw ContractError("no gradient recorded for parameter '" + p.name + "'");
  return it->second;
}

const Tensor& Graph::value(Var v) const { return nodes_[check(v)].value; }

int Graph::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("Var does not belong to this graph");
  return v.id;
}

Var Graph::push(Tensor value, std::function<void(Graph&)> backprop) {
  nodes_.push_back(Node{std::move(value), Tensor(), std::move(backprop), nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Graph::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grad.rows() == 0) n.grad = Tensor(n.value.rows(), n.value.cols(), 0.0);
  return n.grad;
}

void Graph::add_grad(int id, const Tensor& g) {
  Tensor& buf = grad_buf(id);
  double* dst = buf.data();
  const double* src = g.data();
  for (long long i = 0; i < buf.size(); ++i) dst[i] += src[i];
}

Var Graph::constant(Tensor v) { return push(std::move(v), nullptr); }

Var Graph::param(const Param& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{it->second};
  Var v = push(p.value, nullptr);
  nodes_[v.id].param = &p;
  param_nodes_.emplace(&p, v.id);
  registered_.push_back(&p);
  return v;
}

Var Graph::matmul(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  Tensor out = dpc::matmul(nodes_[ia].value, nodes_[ib].value);
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [ia, ib, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    g.add_grad(ia, dpc::matmul_nt(go, g.nodes_[ib].value));
    g.add_grad(ib, dpc::matmul_tn(g.nodes_[ia].value, go));
  };
  return v;
}

Var Graph::add(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  Tensor out = dpc::add(nodes_[ia].value, nodes_[ib].value);
  const bool bcast = nodes_[ib].value.cols() == 1 && nodes_[ia].value.cols() != 1;
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [ia, ib, bcast, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    g.add_grad(ia, go);
    if (!bcast) {
      g.add_grad(ib, go);
    } else {
      Tensor gb(go.rows(), 1, 0.0);
      for (int i = 0; i < go.rows(); ++i)
        for (int j = 0; j < go.cols(); ++j) gb(i, 0) += go(i, j);
      g.add_grad(ib, gb);
    }
  };
  return v;
}

Var Graph::sub(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  Tensor out = dpc::sub(nodes_[ia].value, nodes_[ib].value);
  const bool bcast = nodes_[ib].value.cols() == 1 && nodes_[ia].value.cols() != 1;
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [ia, ib, bcast, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    g.add_grad(ia, go);
    Tensor gb(g.nodes_[ib].value.rows(), g.nodes_[ib].value.cols(), 0.0);
    for (int i = 0; i < go.rows(); ++i)
      for (int j = 0; j < go.cols(); ++j) gb(i, bcast ? 0 : j) -= go(i, j);
    g.add_grad(ib, gb);
  };
  return v;
}

Var Graph::hadamard(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  Tensor out = dpc::hadamard(nodes_[ia].value, nodes_[ib].value);
  const bool bcast = nodes_[ib].value.cols() == 1 && nodes_[ia].value.cols() != 1;
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [ia, ib, bcast, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    const Tensor& av = g.nodes_[ia].value;
    const Tensor& bv = g.nodes_[ib].value;
    Tensor ga(av.rows(), av.cols());
    for (int i = 0; i < av.rows(); ++i)
      for (int j = 0; j < av.cols(); ++j) ga(i, j) = go(i, j) * bv(i, bcast ? 0 : j);
    g.add_grad(ia, ga);
    Tensor gb(bv.rows(), bv.cols(), 0.0);
    for (int i = 0; i < av.rows(); ++i)
      for (int j = 0; j < av.cols(); ++j) gb(i, bcast ? 0 : j) += go(i, j) * av(i, j);
    g.add_grad(ib, gb);
  };
  return v;
}

Var Graph::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  std::vector<int> ids;
  std::vector<Tensor> vals;
  ids.reserve(parts.size());
  for (Var p : parts) {
    ids.push_back(check(p));
    vals.push_back(nodes_[ids.back()].value);
  }
  Tensor out = dpc::concat_rows(vals);
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [ids, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    int r0 = 0;
    for (int id : ids) {
      const int len = g.nodes_[id].value.rows();
      g.add_grad(id, dpc::slice_rows(go, r0, len));
      r0 += len;
    }
  };
  return v;
}

Var Graph::slice_rows(Var t, int start, int len) {
  const int it = check(t);
  Tensor out = dpc::slice_rows(nodes_[it].value, start, len);
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [it, start, len, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    const Tensor& src = g.nodes_[it].value;
    Tensor gt(src.rows(), src.cols(), 0.0);
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < go.cols(); ++j) gt(start + i, j) = go(i, j);
    g.add_grad(it, gt);
  };
  return v;
}

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu_fwd(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_bwd(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double sech2 = 1.0 - t * t;
  return 0.5 * (1.0 + t) + 0.5 * x * sech2 * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

double sigmoid_fwd(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus_fwd(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw ContractError(std::string(op) + ": non-finite input");
}

}  // namespace

Var Graph::relu(Var t) {
  const int it = check(t);
  require_finite(nodes_[it].value, "relu");
  Tensor out = nodes_[it].value;
  for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [it, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    const Tensor& x = g.nodes_[it].value;
    Tensor gt(x.rows(), x.cols());
    for (long long i = 0; i < x.size(); ++i) gt.data()[i] = x.data()[i] > 0.0 ? go.data()[i] : 0.0;
    g.add_grad(it, gt);
  };
  return v;
}

Var Graph::gelu(Var t) {
  const int it = check(t);
  require_finite(nodes_[it].value, "gelu");
  Tensor out = nodes_[it].value;
  for (double& v : out.flat()) v = gelu_fwd(v);
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [it, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    const Tensor& x = g.nodes_[it].value;
    Tensor gt(x.rows(), x.cols());
    for (long long i = 0; i < x.size(); ++i) gt.data()[i] = go.data()[i] * gelu_bwd(x.data()[i]);
    g.add_grad(it, gt);
  };
  return v;
}

Var Graph::sigmoid(Var t) {
  const int it = check(t);
  require_finite(nodes_[it].value, "sigmoid");
  Tensor out = nodes_[it].value;
  for (double& v : out.flat()) v = sigmoid_fwd(v);
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [it, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    const Tensor& s = g.nodes_[self].value;
    Tensor gt(s.rows(), s.cols());
    for (long long i = 0; i < s.size(); ++i) {
      const double sv = s.data()[i];
      gt.data()[i] = go.data()[i] * sv * (1.0 - sv);
    }
    g.add_grad(it, gt);
  };
  return v;
}

Var Graph::softplus(Var t) {
  const int it = check(t);
  require_finite(nodes_[it].value, "softplus");
  Tensor out = nodes_[it].value;
  for (double& v : out.flat()) v = softplus_fwd(v);
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [it, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    const Tensor& x = g.nodes_[it].value;
    Tensor gt(x.rows(), x.cols());
    for (long long i = 0; i < x.size(); ++i)
      gt.data()[i] = go.data()[i] * sigmoid_fwd(x.data()[i]);
    g.add_grad(it, gt);
  };
  return v;
}

Var Graph::softmax_rows(Var t) {
  const int it = check(t);
  require_finite(nodes_[it].value, "softmax_rows");
  const Tensor& x = nodes_[it].value;
  Tensor out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    double mx = x(i, 0);
    for (int j = 1; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
    double denom = 0.0;
    for (int j = 0; j < x.cols(); ++j) denom += std::exp(x(i, j) - mx);
    for (int j = 0; j < x.cols(); ++j) out(i, j) = std::exp(x(i, j) - mx) / denom;
  }
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [it, self](Graph& g) {
    const Tensor& go = g.nodes_[self].grad;
    const Tensor& s = g.nodes_[self].value;
    Tensor gt(s.rows(), s.cols());
    for (int i = 0; i < s.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < s.cols(); ++j) dot += go(i, j) * s(i, j);
      for (int j = 0; j < s.cols(); ++j) gt(i, j) = s(i, j) * (go(i, j) - dot);
    }
    g.add_grad(it, gt);
  };
  return v;
}

Var Graph::affine(Var t, double a, double b) {
  const int it = check(t);
  Tensor out = nodes_[it].value;
  for (double& v : out.flat()) v = a * v + b;
  Var v = push(std::move(out), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [it, a, self](Graph& g) {
    g.add_grad(it, dpc::scale(g.nodes_[self].grad, a));
  };
  return v;
}

Var Graph::mean(Var t) {
  const int it = check(t);
  const Tensor& x = nodes_[it].value;
  if (x.empty()) throw DimensionError("mean: empty tensor");
  Var v = push(Tensor::scalar(dpc::mean(x)), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [it, self](Graph& g) {
    const double go = g.nodes_[self].grad.item();
    const Tensor& x2 = g.nodes_[it].value;
    g.add_grad(it, Tensor(x2.rows(), x2.cols(), go / static_cast<double>(x2.size())));
  };
  return v;
}

Var Graph::sum_squares(Var t) {
  const int it = check(t);
  const Tensor& x = nodes_[it].value;
  if (x.empty()) throw DimensionError("sum_squares: empty tensor");
  Var v = push(Tensor::scalar(dpc::sum_squares(x)), nullptr);
  const int self = v.id;
  nodes_[self].backprop = [it, self](Graph& g) {
    const double go = g.nodes_[self].grad.item();
    g.add_grad(it, dpc::scale(g.nodes_[it].value, 2.0 * go));
  };
  return v;
}

GradientMap Graph::backward(Var loss) {
  const int il = check(loss);
  const Tensor& lv = nodes_[il].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ContractError("backward: loss must be scalar, got " + lv.shape_str());
  for (Node& n : nodes_) n.grad = Tensor();
  grad_buf(il)(0, 0) = 1.0;
  for (int i = il; i >= 0; --i) {
    if (!has_grad(i) || !nodes_[i].backprop) continue;
    nodes_[i].backprop(*this);
  }
  GradientMap out;
  for (const Param* p : registered_) {
    const int id = param_nodes_.at(p);
    if (has_grad(id)) {
      out.grads_.emplace(p, nodes_[id].grad);
    } else {
      out.grads_.emplace(p, Tensor(p->value.rows(), p->value.cols(), 0.0));
    }
  }
  return out;
}

}  // namespace dpc
