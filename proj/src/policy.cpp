#include "dpc/policy.hpp"

#include <chrono>
#include <cmath>

#include "dpc/errors.hpp"

namespace dpc {

int FeatureLayout::total_rows() const {
  int n = 0;
  for (const FeatureSegment& s : segments) n += s.rows;
  return n;
}

Var assemble_features(Graph& g, const std::map<std::string, Var>& segments,
                      const FeatureLayout& layout) {
  if (layout.segments.empty()) throw ConfigError("feature layout has no segments");
  std::vector<Var> parts;
  parts.reserve(layout.segments.size());
  for (const FeatureSegment& seg : layout.segments) {
    auto it = segments.find(seg.name);
    if (it == segments.end())
      throw DimensionError("assemble_features: missing segment '" + seg.name + "'");
    const Tensor& v = g.value(it->second);
    if (v.rows() != seg.rows)
      throw DimensionError("assemble_features: segment '" + seg.name + "' has " +
                           std::to_string(v.rows()) + " rows, layout expects " +
                           std::to_string(seg.rows));
    parts.push_back(it->second);
  }
  return g.concat_rows(parts);
}

Tensor assemble_features(const std::map<std::string, Tensor>& segments,
                         const FeatureLayout& layout) {
  Graph g;
  std::map<std::string, Var> vars;
  for (const auto& [name, t] : segments) vars.emplace(name, g.constant(t));
  return g.value(assemble_features(g, vars, layout));
}

PolicyNet PolicyNet::make(const FeatureLayout& layout, const std::vector<int>& hidden, int horizon,
                          int n_u, Activation act, Rng& rng) {
  PolicyNet p;
  p.layout = layout;
  p.horizon = horizon;
  p.n_u = n_u;
  std::vector<int> dims{layout.total_rows()};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(horizon * n_u);
  p.net = MLP::make("policy", dims, act, rng);
  p.feat_stats.mean.assign(layout.total_rows(), 0.0);
  p.feat_stats.stddev.assign(layout.total_rows(), 1.0);
  p.u_scale.assign(n_u, 1.0);
  return p;
}

std::vector<Param*> PolicyNet::params() {
  std::vector<Param*> out;
  net.collect(out);
  return out;
}

namespace {

Tensor col_from(const std::vector<double>& v) {
  Tensor t(static_cast<int>(v.size()), 1);
  for (size_t i = 0; i < v.size(); ++i) t(static_cast<int>(i), 0) = v[i];
  return t;
}

Tensor stacked_scale(const std::vector<double>& per_channel, int repeats, bool invert) {
  const int ch = static_cast<int>(per_channel.size());
  Tensor t(ch * repeats, 1);
  for (int k = 0; k < repeats; ++k)
    for (int c = 0; c < ch; ++c)
      t(k * ch + c, 0) = invert ? 1.0 / per_channel[c] : per_channel[c];
  return t;
}

std::map<std::string, Tensor> scenario_segments(const ScenarioBatch& b) {
  return {{"past_outputs", b.past},
          {"output_lower_bounds", b.y_lb},
          {"output_upper_bounds", b.y_ub},
          {"disturbances", b.disturbances}};
}

}  // namespace

Var PolicyNet::forward_normalized(Graph& g, Var features) const {
  const Tensor& f = g.value(features);
  if (f.rows() != layout.total_rows())
    throw DimensionError("policy forward: feature vector has " + std::to_string(f.rows()) +
                         " rows, layout expects " + std::to_string(layout.total_rows()));
  std::vector<double> inv_std(feat_stats.stddev.size());
  for (size_t i = 0; i < inv_std.size(); ++i) inv_std[i] = 1.0 / feat_stats.stddev[i];
  Var centered = g.sub(features, g.constant(col_from(feat_stats.mean)));
  Var normalized = g.hadamard(centered, g.constant(col_from(inv_std)));
  return net.forward(g, normalized);
}

Var PolicyNet::forward(Graph& g, Var features) const {
  Var out = forward_normalized(g, features);
  return g.hadamard(out, g.constant(stacked_scale(u_scale, horizon, false)));
}

ClosedLoopVars closed_loop_rollout(Graph& g, const ClosedLoopModel& cl,
                                   const ScenarioBatch& scenario) {
  if (!cl.policy || !cl.model) throw ContractError("closed loop model is not wired");
  const NeuralSSM& m = *cl.model;
  if (cl.horizon != cl.policy->horizon)
    throw DimensionError("closed loop horizon " + std::to_string(cl.horizon) +
                         " does not match policy horizon " + std::to_string(cl.policy->horizon));
  if (scenario.y_lb.rows() != cl.horizon * m.arch.n_y)
    throw DimensionError("scenario bounds rows " + std::to_string(scenario.y_lb.rows()) +
                         " do not match horizon*n_y = " + std::to_string(cl.horizon * m.arch.n_y));

  std::map<std::string, Var> segments;
  for (const auto& [name, t] : scenario_segments(scenario)) segments.emplace(name, g.constant(t));
  Var features = assemble_features(g, segments, cl.policy->layout);

  Var u_norm = cl.policy->forward_normalized(g, features);
  Var u_eng = g.hadamard(u_norm, g.constant(stacked_scale(cl.policy->u_scale, cl.horizon, false)));

  // the frozen model operates in its own normalized units
  Var past_std =
      g.constant(standardize_rows(scenario.past, cl.ssm_stats.y_mean, cl.ssm_stats.y_std));
  Var d_std = g.constant(
      standardize_rows(scenario.disturbances, cl.ssm_stats.d_mean, cl.ssm_stats.d_std));
  Var u_model =
      g.hadamard(u_eng, g.constant(stacked_scale(cl.ssm_stats.u_scale, cl.horizon, true)));
  SsmRolloutResult roll = ssm_rollout(m, g, past_std, u_model, d_std, cl.horizon, true);

  Var y_eng = g.add(
      g.hadamard(roll.outputs, g.constant(stacked_scale(cl.ssm_stats.y_std, cl.horizon, false))),
      g.constant(stacked_scale(cl.ssm_stats.y_mean, cl.horizon, false)));
  return ClosedLoopVars{u_eng, y_eng, u_norm, roll.outputs};
}

Var economic_loss(Graph& g, Var controls, Var outputs, Var y_lb, Var y_ub, Var u_lb, Var u_ub,
                  Var u_prev, const LossWeights& weights, int horizon, int n_u) {
  if (weights.q_umin < 0 || weights.q_du < 0 || weights.q_y < 0 || weights.q_u < 0)
    throw ConfigError("economic loss weights must be nonnegative");
  const Tensor& uv = g.value(controls);
  if (uv.rows() != horizon * n_u)
    throw DimensionError("economic_loss: controls are " + uv.shape_str() + ", expected " +
                         std::to_string(horizon * n_u) + " rows");
  const int batch = uv.cols();

  Var energy = g.sum_squares(controls);

  // control rate of change against the trajectory shifted one step back
  Var shifted = horizon == 1 ? u_prev
                             : g.concat_rows(std::vector<Var>{
                                   u_prev, g.slice_rows(controls, 0, (horizon - 1) * n_u)});
  Var du = g.sum_squares(g.sub(controls, shifted));

  Var y_under = penalty_lower(g, outputs, y_lb, weights.penalty);
  Var y_over = penalty_upper(g, outputs, y_ub, weights.penalty);
  Var u_under = penalty_lower(g, controls, u_lb, weights.penalty);
  Var u_over = penalty_upper(g, controls, u_ub, weights.penalty);

  Var total = g.add(g.affine(energy, weights.q_umin, 0.0), g.affine(du, weights.q_du, 0.0));
  total = g.add(total,
                g.affine(g.add(g.sum_squares(y_under), g.sum_squares(y_over)), weights.q_y, 0.0));
  total = g.add(total,
                g.affine(g.add(g.sum_squares(u_under), g.sum_squares(u_over)), weights.q_u, 0.0));
  return g.affine(total, 1.0 / (static_cast<double>(batch) * horizon), 0.0);
}

Tensor policy_apply_receding(const PolicyNet& policy,
                             const std::map<std::string, Tensor>& segments) {
  Graph g;
  std::map<std::string, Var> vars;
  for (const auto& [name, t] : segments) vars.emplace(name, g.constant(t));
  Var features = assemble_features(g, vars, policy.layout);
  Var traj = policy.forward(g, features);
  return g.value(g.slice_rows(traj, 0, policy.n_u));
}

namespace {

// economic loss of a scenario batch in normalized units (model output scale
// for y, control scale for u)
Var scenario_loss(Graph& g, const ClosedLoopModel& cl, const ScenarioBatch& batch,
                  const LossWeights& weights) {
  ClosedLoopVars vars = closed_loop_rollout(g, cl, batch);
  Var y_lb = g.constant(standardize_rows(batch.y_lb, cl.ssm_stats.y_mean, cl.ssm_stats.y_std));
  Var y_ub = g.constant(standardize_rows(batch.y_ub, cl.ssm_stats.y_mean, cl.ssm_stats.y_std));
  Var u_lb = g.constant(scale_rows(batch.u_lb, cl.policy->u_scale, true));
  Var u_ub = g.constant(scale_rows(batch.u_ub, cl.policy->u_scale, true));
  Var u_prev = g.constant(scale_rows(batch.u_prev, cl.policy->u_scale, true));
  return economic_loss(g, vars.controls_norm, vars.outputs_norm, y_lb, y_ub, u_lb, u_ub, u_prev,
                       weights, cl.horizon, cl.policy->n_u);
}

double eval_loss(const ClosedLoopModel& cl, const ScenarioBatch& batch,
                 const LossWeights& weights) {
  Graph g;
  return g.value(scenario_loss(g, cl, batch, weights)).item();
}

}  // namespace

PolicyTrainResult train_policy(ClosedLoopModel& cl, const CtrlSeriesData& series,
                               const DatasetSplits& splits, const LossWeights& weights,
                               const PolicyTrainConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  if (!cl.policy || !cl.model) throw ContractError("train_policy: closed loop model is not wired");
  PolicyNet& policy = *cl.policy;
  const int n_past = cl.model->arch.n_past;

  const std::vector<int> train_anchors = window_anchors(splits.train, n_past, cl.horizon);
  const std::vector<int> dev_anchors_all = window_anchors(splits.dev, n_past, cl.horizon);
  if (train_anchors.empty() || dev_anchors_all.empty())
    throw ContractError("train_policy: splits too short for scenario windows");

  // feature statistics from the train split
  {
    ScenarioBatch all = make_scenario_batch(series, train_anchors, n_past, cl.horizon);
    Tensor feats = assemble_features(scenario_segments(all), policy.layout);
    policy.feat_stats.mean.assign(feats.rows(), 0.0);
    policy.feat_stats.stddev.assign(feats.rows(), 1.0);
    for (int i = 0; i < feats.rows(); ++i) {
      double m = 0.0;
      for (int j = 0; j < feats.cols(); ++j) m += feats(i, j);
      m /= feats.cols();
      double var = 0.0;
      for (int j = 0; j < feats.cols(); ++j) {
        const double dv = feats(i, j) - m;
        var += dv * dv;
      }
      policy.feat_stats.mean[i] = m;
      const double sd = std::sqrt(var / feats.cols());
      policy.feat_stats.stddev[i] = sd > 1e-9 ? sd : 1.0;
    }
  }

  // fixed dev subsample, evenly strided
  std::vector<int> dev_anchors;
  const int dev_cap = 512;
  const int stride = std::max(1, static_cast<int>(dev_anchors_all.size()) / dev_cap);
  for (size_t i = 0; i < dev_anchors_all.size(); i += stride)
    dev_anchors.push_back(dev_anchors_all[i]);
  const ScenarioBatch dev_batch = make_scenario_batch(series, dev_anchors, n_past, cl.horizon);

  std::vector<Param*> params = policy.params();
  AdamOptimizer opt(cfg.optimizer);
  Rng rng(Rng::stream(cfg.seed, 20).raw());

  PolicyTrainResult result;
  result.initial_dev_loss = eval_loss(cl, dev_batch, weights);
  result.best_dev_loss = result.initial_dev_loss;
  result.best_update = 0;

  std::vector<Tensor> best_values;
  const auto snapshot = [&]() {
    best_values.clear();
    for (Param* p : params) best_values.push_back(p->value);
  };
  snapshot();

  for (int update = 1; update <= cfg.updates; ++update) {
    std::vector<int> picks(cfg.batch_size);
    for (int& a : picks)
      a = train_anchors[rng.uniform_int(0, static_cast<int>(train_anchors.size()) - 1)];
    ScenarioBatch batch = make_scenario_batch(series, picks, n_past, cl.horizon);

    Graph g;
    Var loss = scenario_loss(g, cl, batch, weights);
    const double lv = g.value(loss).item();
    if (!std::isfinite(lv))
      throw TrainingError("train_policy: non-finite loss at update " + std::to_string(update));
    GradientMap grads = g.backward(loss);
    opt.step(params, grads);

    UpdateRecord rec{update, lv, -1.0, result.best_dev_loss};
    if (update % cfg.dev_interval == 0 || update == cfg.updates) {
      rec.dev_loss = eval_loss(cl, dev_batch, weights);
      if (rec.dev_loss < result.best_dev_loss) {
        result.best_dev_loss = rec.dev_loss;
        result.best_update = update;
        snapshot();
      }
      rec.best_dev_loss = result.best_dev_loss;
    }
    result.history.push_back(rec);
  }

  for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace dpc
