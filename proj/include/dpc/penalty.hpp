#pragma once

#include <string>

#include "dpc/graph.hpp"

namespace dpc {

// Inequality-violation activations. relu gives the exact hinge
// max(0, violation); softplus and gelu are smooth stand-ins that are
// strictly positive near the boundary.
enum class PenaltyKind { relu, softplus, gelu };

PenaltyKind penalty_from_string(const std::string& s);
std::string to_string(PenaltyKind k);

// p(x, ub) = act(x - ub): elementwise magnitude of upper-bound violation
Var penalty_upper(Graph& g, Var x, Var upper, PenaltyKind kind = PenaltyKind::relu);
// p(x, lb) = act(lb - x)
Var penalty_lower(Graph& g, Var x, Var lower, PenaltyKind kind = PenaltyKind::relu);

// value-level hinge penalties
Tensor penalty_upper(const Tensor& x, const Tensor& upper);
Tensor penalty_lower(const Tensor& x, const Tensor& lower);

}  // namespace dpc
