#include "dpc/adam.hpp"

#include <cmath>

#include "dpc/errors.hpp"

namespace dpc {

AdamOptimizer::AdamOptimizer(AdamConfig cfg) : cfg_(cfg) {
  if (cfg.lr <= 0.0) throw ConfigError("adam: lr must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0) throw ConfigError("adam: beta1 must be in [0,1)");
  if (cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) throw ConfigError("adam: beta2 must be in [0,1)");
  if (cfg.eps <= 0.0) throw ConfigError("adam: eps must be positive");
}

void AdamOptimizer::step(std::span<Param* const> params, const GradientMap& grads) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (Param* p : params) {
    const Tensor& g = grads.at(*p);
    if (!g.same_shape(p->value)) {
      throw DimensionError("adam: gradient " + g.shape_str() + " does not match parameter '" +
                           p->name + "' " + p->value.shape_str());
    }
    auto [it, inserted] = moments_.try_emplace(p);
    if (inserted) {
      it->second.m = Tensor(g.rows(), g.cols(), 0.0);
      it->second.v = Tensor(g.rows(), g.cols(), 0.0);
    }
    Tensor& m = it->second.m;
    Tensor& v = it->second.v;
    double* mp = m.data();
    double* vp = v.data();
    double* wp = p->value.data();
    const double* gp = g.data();
    for (long long i = 0; i < g.size(); ++i) {
      mp[i] = cfg_.beta1 * mp[i] + (1.0 - cfg_.beta1) * gp[i];
      vp[i] = cfg_.beta2 * vp[i] + (1.0 - cfg_.beta2) * gp[i] * gp[i];
      const double mhat = mp[i] / bc1;
      const double vhat = vp[i] / bc2;
      wp[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace dpc
