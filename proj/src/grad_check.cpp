#include "dpc/grad_check.hpp"

#include <cmath>
#include <cstring>

#include "dpc/errors.hpp"
#include "dpc/rng.hpp"

namespace dpc {

namespace {

double eval_loss(const std::function<Var(Graph&)>& build_loss) {
  Graph g;
  Var loss = build_loss(g);
  const Tensor& v = g.value(loss);
  if (v.rows() != 1 || v.cols() != 1)
    throw ContractError("grad_check: loss must be scalar, got " + v.shape_str());
  return v.item();
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(Graph&)>& build_loss,
                           std::span<Param* const> params, const GradCheckConfig& cfg) {
  if (cfg.step <= 0.0) throw ContractError("grad_check: step must be positive");

  const double l0 = eval_loss(build_loss);
  const double l0_again = eval_loss(build_loss);
  if (std::memcmp(&l0, &l0_again, sizeof(double)) != 0)
    throw ContractError("grad_check: loss closure is not deterministic");

  Graph g;
  Var loss = build_loss(g);
  GradientMap grads = g.backward(loss);

  // candidate components, sampled if requested
  struct Component {
    Param* p;
    int r, c;
  };
  std::vector<Component> comps;
  for (Param* p : params)
    for (int r = 0; r < p->value.rows(); ++r)
      for (int c = 0; c < p->value.cols(); ++c) comps.push_back({p, r, c});
  if (cfg.max_components > 0 && static_cast<int>(comps.size()) > cfg.max_components) {
    Rng rng(cfg.seed ? cfg.seed : 1);
    for (int i = 0; i < cfg.max_components; ++i) {
      const int j = i + rng.uniform_int(0, static_cast<int>(comps.size()) - 1 - i);
      std::swap(comps[i], comps[j]);
    }
    comps.resize(cfg.max_components);
  }

  GradCheckReport report;
  report.components_checked = static_cast<int>(comps.size());
  for (const Component& comp : comps) {
    double& slot = comp.p->value(comp.r, comp.c);
    const double saved = slot;
    slot = saved + cfg.step;
    const double lp = eval_loss(build_loss);
    slot = saved - cfg.step;
    const double lm = eval_loss(build_loss);
    slot = saved;

    const double numeric = (lp - lm) / (2.0 * cfg.step);
    const double analytic = grads.at(*comp.p)(comp.r, comp.c);
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-3});
    const double rel = std::fabs(analytic - numeric) / denom;
    if (rel >= report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = {comp.p->name, comp.r, comp.c, analytic, numeric, rel};
    }
  }
  report.pass = report.max_rel_error <= cfg.tol;
  return report;
}

}  // namespace dpc
