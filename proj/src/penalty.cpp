#include "dpc/penalty.hpp"

#include "dpc/errors.hpp"

namespace dpc {

PenaltyKind penalty_from_string(const std::string& s) {
  if (s == "relu") return PenaltyKind::relu;
  if (s == "softplus") return PenaltyKind::softplus;
  if (s == "gelu") return PenaltyKind::gelu;
  throw ConfigError("unknown penalty kind '" + s + "'");
}

std::string to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::relu: return "relu";
    case PenaltyKind::softplus: return "softplus";
    case PenaltyKind::gelu: return "gelu";
  }
  return "?";
}

namespace {

Var apply_kind(Graph& g, Var v, PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::relu: return g.relu(v);
    case PenaltyKind::softplus: return g.softplus(v);
    case PenaltyKind::gelu: return g.gelu(v);
  }
  return v;
}

}  // namespace

Var penalty_upper(Graph& g, Var x, Var upper, PenaltyKind kind) {
  return apply_kind(g, g.sub(x, upper), kind);
}

Var penalty_lower(Graph& g, Var x, Var lower, PenaltyKind kind) {
  return apply_kind(g, g.sub(lower, x), kind);
}

Tensor penalty_upper(const Tensor& x, const Tensor& upper) {
  Tensor out = sub(x, upper);
  for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor penalty_lower(const Tensor& x, const Tensor& lower) {
  Tensor out = sub(lower, x);
  for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
  return out;
}

}  // namespace dpc
