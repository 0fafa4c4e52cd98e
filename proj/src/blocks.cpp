#include "dpc/blocks.hpp"

#include <cmath>

#include "dpc/errors.hpp"

namespace dpc {

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "gelu") return Activation::gelu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::gelu: return "gelu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "?";
}

Tensor init_params(int rows, int cols, InitScheme scheme, Rng& rng) {
  Tensor out(rows, cols, 0.0);
  if (scheme == InitScheme::uniform_fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& v : out.flat()) v = rng.uniform(-bound, bound);
  }
  return out;
}

LinearMap LinearMap::make(const std::string& name, int out, int in, Rng& rng) {
  LinearMap lm;
  lm.W = Param{name + ".W", init_params(out, in, InitScheme::uniform_fan_in, rng)};
  lm.b = Param{name + ".b", Tensor(out, 1, 0.0)};
  return lm;
}

LinearMap LinearMap::make_zero(const std::string& name, int out, int in) {
  LinearMap lm;
  lm.W = Param{name + ".W", Tensor(out, in, 0.0)};
  lm.b = Param{name + ".b", Tensor(out, 1, 0.0)};
  return lm;
}

Var LinearMap::forward(Graph& g, Var x, bool frozen) const {
  Var w = frozen ? g.constant(W.value) : g.param(W);
  Var bias = frozen ? g.constant(b.value) : g.param(b);
  return g.add(g.matmul(w, x), bias);
}

void LinearMap::collect(std::vector<Param*>& out) {
  out.push_back(&W);
  out.push_back(&b);
}

MLP MLP::make(const std::string& name, const std::vector<int>& dims, Activation act, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("mlp '" + name + "' needs at least input and output dims");
  MLP net;
  net.activation = act;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    net.layers.push_back(LinearMap::make(name + ".layer" + std::to_string(l), dims[l + 1], dims[l], rng));
  }
  return net;
}

Var MLP::forward(Graph& g, Var x, bool frozen) const {
  const Tensor& xv = g.value(x);
  if (xv.rows() != in_dim()) {
    throw DimensionError("mlp forward: input has " + std::to_string(xv.rows()) +
                         " rows, expected " + std::to_string(in_dim()));
  }
  Var h = x;
  for (size_t l = 0; l < layers.size(); ++l) {
    h = layers[l].forward(g, h, frozen);
    if (l + 1 == layers.size()) break;  // final layer stays affine
    switch (activation) {
      case Activation::relu: h = g.relu(h); break;
      case Activation::gelu: h = g.gelu(h); break;
      case Activation::sigmoid: h = g.sigmoid(h); break;
      case Activation::identity: break;
    }
  }
  return h;
}

size_t MLP::param_count() const {
  size_t n = 0;
  for (const LinearMap& l : layers) n += l.param_count();
  return n;
}

void MLP::collect(std::vector<Param*>& out) {
  for (LinearMap& l : layers) l.collect(out);
}

StableDynamicsMap StableDynamicsMap::make(const std::string& name, int n, double lambda_min,
                                          double lambda_max, Rng& rng) {
  if (!(0.0 <= lambda_min && lambda_min < lambda_max && lambda_max < 1.0)) {
    throw ConfigError("stable dynamics map '" + name + "': bounds must satisfy 0 <= min < max < 1, got [" +
                      std::to_string(lambda_min) + ", " + std::to_string(lambda_max) + "]");
  }
  StableDynamicsMap m;
  m.lambda_min = lambda_min;
  m.lambda_max = lambda_max;
  Tensor mix(n, n);
  for (double& v : mix.flat()) v = rng.uniform(-0.1, 0.1);
  m.M = Param{name + ".M", std::move(mix)};
  m.s = Param{name + ".s", Tensor(n, 1, 0.0)};
  return m;
}

Var StableDynamicsMap::materialize(Graph& g, bool frozen) const {
  Var mix = frozen ? g.constant(M.value) : g.param(M);
  Var damp = frozen ? g.constant(s.value) : g.param(s);
  Var lambda = g.affine(g.sigmoid(damp), lambda_max - lambda_min, lambda_min);  // n x 1
  return g.hadamard(g.softmax_rows(mix), lambda);
}

Tensor StableDynamicsMap::materialize_value() const {
  Graph g;
  return g.value(materialize(g, true));
}

void StableDynamicsMap::collect(std::vector<Param*>& out) {
  out.push_back(&M);
  out.push_back(&s);
}

PowerIterResult spectral_radius(const Tensor& a, int max_iters, double tol) {
  if (a.rows() != a.cols()) throw DimensionError("spectral_radius: matrix must be square, got " + a.shape_str());
  const int n = a.rows();
  Tensor v(n, 1, 1.0);
  PowerIterResult res;
  double prev = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Tensor av = matmul(a, v);
    const double norm = max_abs(av);
    res.iterations = it + 1;
    if (norm == 0.0) {
      res.value = 0.0;
      res.converged = true;
      return res;
    }
    res.value = norm / max_abs(v);
    v = scale(av, 1.0 / norm);
    if (it > 0 && std::fabs(res.value - prev) <= tol * std::max(1.0, std::fabs(res.value))) {
      res.converged = true;
      return res;
    }
    prev = res.value;
  }
  return res;
}

}  // namespace dpc
