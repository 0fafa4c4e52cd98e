#pragma once

// Shared helpers for the test suites: random tensor fills and an independent
// central-difference gradient oracle (finite differences of forward values
// only, no reliance on the backward pass under test).

#include <functional>

#include "dpc/graph.hpp"
#include "dpc/rng.hpp"

namespace dpc_test {

inline dpc::Tensor random_tensor(int rows, int cols, dpc::Rng& rng, double lo = -1.0,
                                 double hi = 1.0) {
  dpc::Tensor t(rows, cols);
  for (double& v : t.flat()) v = rng.uniform(lo, hi);
  return t;
}

// d(loss)/d(param[r][c]) by central differences; build must return a scalar.
inline double fd_grad(const std::function<dpc::Var(dpc::Graph&)>& build, dpc::Param& param, int r,
                      int c, double step = 1e-6) {
  double& slot = param.value(r, c);
  const double saved = slot;
  slot = saved + step;
  double lp;
  {
    dpc::Graph g;
    lp = g.value(build(g)).item();
  }
  slot = saved - step;
  double lm;
  {
    dpc::Graph g;
    lm = g.value(build(g)).item();
  }
  slot = saved;
  return (lp - lm) / (2.0 * step);
}

inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace dpc_test
