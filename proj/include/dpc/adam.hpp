#pragma once

#include <span>
#include <unordered_map>
#include <utility>

#include "dpc/graph.hpp"

namespace dpc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moment tensors live per parameter address and are
// created lazily on the first step; the step counter advances once per call.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg = {});

  // Applies one update to every parameter in list order (deterministic).
  void step(std::span<Param* const> params, const GradientMap& grads);

  long long step_count() const { return step_count_; }

 private:
  struct Moments {
    Tensor m, v;
  };
  AdamConfig cfg_;
  long long step_count_ = 0;
  std::unordered_map<const Param*, Moments> moments_;
};

}  // namespace dpc
