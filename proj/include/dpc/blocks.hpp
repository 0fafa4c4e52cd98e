#pragma once

#include <string>
#include <vector>

#include "dpc/graph.hpp"
#include "dpc/rng.hpp"

namespace dpc {

enum class Activation { relu, gelu, sigmoid, identity };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

enum class InitScheme { uniform_fan_in, zeros };

// uniform-fan-in draws U(-1/sqrt(cols), +1/sqrt(cols)) per entry
Tensor init_params(int rows, int cols, InitScheme scheme, Rng& rng);

// Affine map y = W x + b acting on column-batched inputs.
struct LinearMap {
  Param W;  // out x in
  Param b;  // out x 1

  int in_dim() const { return W.value.cols(); }
  int out_dim() const { return W.value.rows(); }

  static LinearMap make(const std::string& name, int out, int in, Rng& rng);
  static LinearMap make_zero(const std::string& name, int out, int in);

  Var forward(Graph& g, Var x, bool frozen = false) const;
  void collect(std::vector<Param*>& out);
  size_t param_count() const { return W.value.size() + b.value.size(); }
};

// Fully connected network: hidden layers share one activation, the final
// layer is affine.
struct MLP {
  std::vector<LinearMap> layers;
  Activation activation = Activation::gelu;

  // dims = {in, hidden..., out}; a single entry pair gives a plain affine map
  static MLP make(const std::string& name, const std::vector<int>& dims, Activation act, Rng& rng);

  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }

  Var forward(Graph& g, Var x, bool frozen = false) const;
  size_t param_count() const;
  void collect(std::vector<Param*>& out);
};

// State-transition matrix that is stable by construction: row i of the
// materialized A is lambda_i * softmax(M_i) with
// lambda_i = lambda_min + (lambda_max - lambda_min) * sigmoid(s_i).
// Every entry is nonnegative and every row sum lies in (lambda_min,
// lambda_max), so the spectral radius is bounded by lambda_max.
struct StableDynamicsMap {
  Param M;  // n x n unconstrained mixing
  Param s;  // n x 1 unconstrained damping
  double lambda_min = 0.8;
  double lambda_max = 0.99;

  int dim() const { return M.value.rows(); }

  static StableDynamicsMap make(const std::string& name, int n, double lambda_min,
                                double lambda_max, Rng& rng);

  Var materialize(Graph& g, bool frozen = false) const;
  Tensor materialize_value() const;
  void collect(std::vector<Param*>& out);
  size_t param_count() const { return M.value.size() + s.value.size(); }
};

struct PowerIterResult {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Dominant eigenvalue magnitude via power iteration with infinity-norm
// ratios. For nonnegative matrices the estimate never exceeds the maximum
// row sum.
PowerIterResult spectral_radius(const Tensor& a, int max_iters = 1000, double tol = 1e-12);

}  // namespace dpc
