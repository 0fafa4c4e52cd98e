#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dpc/graph.hpp"

namespace dpc {

struct GradCheckConfig {
  double step = 1e-6;
  double tol = 1e-5;
  // 0 = check every scalar; otherwise sample this many components across all
  // parameters (seeded), which keeps large models affordable
  int max_components = 0;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string param;
  int row = 0, col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  GradCheckEntry worst;
  int components_checked = 0;
};

// Compares backward() gradients against central finite differences of the
// loss built by `build_loss`. The closure must be deterministic: it is
// evaluated twice at the unperturbed parameters and a bitwise loss mismatch
// raises ContractError. Relative error uses a small denominator floor so
// near-zero gradients are compared absolutely.
GradCheckReport grad_check(const std::function<Var(Graph&)>& build_loss,
                           std::span<Param* const> params, const GradCheckConfig& cfg = {});

}  // namespace dpc
