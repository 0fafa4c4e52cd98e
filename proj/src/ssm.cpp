#include "dpc/ssm.hpp"

#include <chrono>
#include <cmath>

#include "dpc/errors.hpp"

namespace dpc {

StateMapKind state_map_from_string(const std::string& s) {
  if (s == "stable") return StateMapKind::stable;
  if (s == "linear") return StateMapKind::linear;
  throw ConfigError("unknown state map kind '" + s + "'");
}

std::string to_string(StateMapKind k) {
  return k == StateMapKind::stable ? "stable" : "linear";
}

NeuralSSM NeuralSSM::make(const SsmArch& arch, Rng& rng) {
  NeuralSSM m;
  m.arch = arch;
  std::vector<int> obs_dims{arch.n_past * arch.n_y};
  obs_dims.insert(obs_dims.end(), arch.observer_hidden.begin(), arch.observer_hidden.end());
  obs_dims.push_back(arch.n_x);
  m.observer = MLP::make("observer", obs_dims, arch.activation, rng);

  m.state_stable = StableDynamicsMap::make("state_map", arch.n_x, arch.lambda_min,
                                           arch.lambda_max, rng);
  m.state_linear = LinearMap::make("state_map", arch.n_x, arch.n_x, rng);

  std::vector<int> in_dims{arch.n_u};
  in_dims.insert(in_dims.end(), arch.input_hidden.begin(), arch.input_hidden.end());
  in_dims.push_back(arch.n_x);
  m.input_map = MLP::make("input_map", in_dims, arch.activation, rng);

  std::vector<int> d_dims{arch.n_d};
  d_dims.insert(d_dims.end(), arch.dist_hidden.begin(), arch.dist_hidden.end());
  d_dims.push_back(arch.n_x);
  m.dist_map = MLP::make("dist_map", d_dims, arch.activation, rng);

  m.output_map = LinearMap::make("output_map", arch.n_y, arch.n_x, rng);
  return m;
}

std::vector<Param*> NeuralSSM::params() {
  std::vector<Param*> out;
  observer.collect(out);
  if (arch.state_map == StateMapKind::stable) {
    state_stable.collect(out);
  } else {
    state_linear.collect(out);
  }
  input_map.collect(out);
  dist_map.collect(out);
  output_map.collect(out);
  return out;
}

size_t NeuralSSM::param_count() const {
  size_t n = observer.param_count() + input_map.param_count() + dist_map.param_count() +
             output_map.param_count();
  n += arch.state_map == StateMapKind::stable ? state_stable.param_count()
                                              : state_linear.param_count();
  return n;
}

Var NeuralSSM::state_matrix(Graph& g, bool frozen) const {
  if (arch.state_map == StateMapKind::stable) return state_stable.materialize(g, frozen);
  return frozen ? g.constant(state_linear.W.value) : g.param(state_linear.W);
}

Tensor NeuralSSM::state_matrix_value() const {
  if (arch.state_map == StateMapKind::stable) return state_stable.materialize_value();
  return state_linear.W.value;
}

Var estimate_initial_state(const NeuralSSM& m, Graph& g, Var past_window, bool frozen) {
  const Tensor& w = g.value(past_window);
  if (w.rows() != m.arch.n_past * m.arch.n_y) {
    throw DimensionError("estimate_initial_state: window has " + std::to_string(w.rows()) +
                         " rows, expected " + std::to_string(m.arch.n_past * m.arch.n_y));
  }
  return m.observer.forward(g, past_window, frozen);
}

namespace {

SsmStepResult step_with_matrix(const NeuralSSM& m, Graph& g, Var a, Var x, Var u, Var d,
                               bool frozen) {
  Var ax = g.matmul(a, x);
  if (m.arch.state_map == StateMapKind::linear) {
    Var bias = frozen ? g.constant(m.state_linear.b.value) : g.param(m.state_linear.b);
    ax = g.add(ax, bias);
  }
  Var fu = m.input_map.forward(g, u, frozen);
  Var fd = m.dist_map.forward(g, d, frozen);
  Var x_next = g.add(g.add(ax, fu), fd);
  Var y_next = m.output_map.forward(g, x_next, frozen);
  return SsmStepResult{x_next, y_next, fu, fd};
}

}  // namespace

SsmStepResult ssm_step(const NeuralSSM& m, Graph& g, Var x, Var u, Var d, bool frozen) {
  return step_with_matrix(m, g, m.state_matrix(g, frozen), x, u, d, frozen);
}

SsmRolloutResult ssm_rollout(const NeuralSSM& m, Graph& g, Var past_window, Var controls,
                             Var disturbances, int horizon, bool frozen) {
  if (horizon < 1) throw ContractError("ssm_rollout: horizon must be >= 1");
  const Tensor& uv = g.value(controls);
  const Tensor& dv = g.value(disturbances);
  if (uv.rows() != horizon * m.arch.n_u)
    throw DimensionError("ssm_rollout: controls have " + std::to_string(uv.rows()) +
                         " rows, expected " + std::to_string(horizon * m.arch.n_u));
  if (dv.rows() != horizon * m.arch.n_d)
    throw DimensionError("ssm_rollout: disturbances have " + std::to_string(dv.rows()) +
                         " rows, expected " + std::to_string(horizon * m.arch.n_d));

  SsmRolloutResult res;
  Var a = m.state_matrix(g, frozen);
  Var x = estimate_initial_state(m, g, past_window, frozen);
  std::vector<Var> ys;
  ys.reserve(horizon);
  for (int k = 0; k < horizon; ++k) {
    Var u_k = g.slice_rows(controls, k * m.arch.n_u, m.arch.n_u);
    Var d_k = g.slice_rows(disturbances, k * m.arch.n_d, m.arch.n_d);
    SsmStepResult step = step_with_matrix(m, g, a, x, u_k, d_k, frozen);
    x = step.x_next;
    ys.push_back(step.y_next);
    res.states.push_back(step.x_next);
    res.fu_outs.push_back(step.fu_out);
    res.fd_outs.push_back(step.fd_out);
  }
  res.outputs = g.concat_rows(ys);
  return res;
}

Var sysid_loss(const NeuralSSM& m, Graph& g, const SysIdBatch& batch, const SysIdLossConfig& cfg) {
  if (batch.count() == 0) throw ContractError("sysid_loss: empty batch");
  const int horizon = batch.targets.rows() / m.arch.n_y;
  Var past = g.constant(batch.past);
  Var controls = g.constant(batch.controls);
  Var dists = g.constant(batch.disturbances);
  SsmRolloutResult roll = ssm_rollout(m, g, past, controls, dists, horizon);

  Var err = g.sub(roll.outputs, g.constant(batch.targets));
  Var loss = g.affine(g.mean(g.hadamard(err, err)), cfg.fit_weight, 0.0);

  if (cfg.influence_weight > 0.0 && cfg.influence_bound > 0.0) {
    std::vector<Var> blocks;
    blocks.reserve(roll.fu_outs.size() + roll.fd_outs.size());
    for (Var v : roll.fu_outs) blocks.push_back(v);
    for (Var v : roll.fd_outs) blocks.push_back(v);
    Var stacked = g.concat_rows(blocks);
    const Tensor& sv = g.value(stacked);
    Var ub = g.constant(Tensor(sv.rows(), sv.cols(), cfg.influence_bound));
    Var lb = g.constant(Tensor(sv.rows(), sv.cols(), -cfg.influence_bound));
    Var over = penalty_upper(g, stacked, ub, cfg.penalty);
    Var under = penalty_lower(g, stacked, lb, cfg.penalty);
    Var pen = g.add(g.mean(g.hadamard(over, over)), g.mean(g.hadamard(under, under)));
    loss = g.add(loss, g.affine(pen, cfg.influence_weight, 0.0));
  }

  if (cfg.smooth_weight > 0.0 && roll.states.size() > 1) {
    std::vector<Var> diffs;
    for (size_t k = 1; k < roll.states.size(); ++k)
      diffs.push_back(g.sub(roll.states[k], roll.states[k - 1]));
    Var dx = g.concat_rows(diffs);
    loss = g.add(loss, g.affine(g.mean(g.hadamard(dx, dx)), cfg.smooth_weight, 0.0));
  }
  return loss;
}

SeriesData normalize_series(const SeriesData& series, const NormStats& stats) {
  SeriesData out;
  out.u = scale_rows(series.u, stats.u_scale, true);
  out.d = standardize_rows(series.d, stats.d_mean, stats.d_std);
  out.y = standardize_rows(series.y, stats.y_mean, stats.y_std);
  return out;
}

double open_loop_nmse(const NeuralSSM& m, const SeriesData& normalized, SplitRange split,
                      int horizon, int batch_size) {
  const std::vector<int> anchors = window_anchors(split, m.arch.n_past, horizon);
  if (anchors.empty()) throw ContractError("open_loop_nmse: split too short for windows");
  double sq_err = 0.0;
  std::vector<double> tgt_sum, tgt_sq;
  long long count = 0;
  // first pass accumulates per-channel target moments for the variance
  const int n_y = m.arch.n_y;
  tgt_sum.assign(n_y, 0.0);
  tgt_sq.assign(n_y, 0.0);
  for (size_t start = 0; start < anchors.size(); start += batch_size) {
    const size_t end = std::min(anchors.size(), start + batch_size);
    std::vector<int> part(anchors.begin() + start, anchors.begin() + end);
    SysIdBatch batch = make_sysid_batch(normalized, part, m.arch.n_past, horizon);
    Graph g;
    SsmRolloutResult roll = ssm_rollout(m, g, g.constant(batch.past), g.constant(batch.controls),
                                        g.constant(batch.disturbances), horizon, true);
    const Tensor& pred = g.value(roll.outputs);
    for (int i = 0; i < pred.rows(); ++i) {
      for (int j = 0; j < pred.cols(); ++j) {
        const double t = batch.targets(i, j);
        const double e = pred(i, j) - t;
        sq_err += e * e;
        tgt_sum[i % n_y] += t;
        tgt_sq[i % n_y] += t * t;
        ++count;
      }
    }
  }
  double var = 0.0;
  const double per_ch = static_cast<double>(count) / n_y;
  for (int c = 0; c < n_y; ++c) {
    const double mu = tgt_sum[c] / per_ch;
    var += tgt_sq[c] / per_ch - mu * mu;
  }
  var /= n_y;
  if (var <= 0.0) throw ContractError("open_loop_nmse: degenerate target variance");
  return (sq_err / count) / var;
}

SsmTrainResult train_ssm(NeuralSSM& m, const SeriesData& normalized, const DatasetSplits& splits,
                         const SysIdConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  if (cfg.epochs < 0) throw ConfigError("train_ssm: epochs must be >= 0");
  if (cfg.loss.fit_weight < 0 || cfg.loss.smooth_weight < 0 || cfg.loss.influence_weight < 0)
    throw ConfigError("train_ssm: loss weights must be nonnegative");

  SysIdLossConfig loss_cfg = cfg.loss;
  if (loss_cfg.influence_weight > 0.0 && loss_cfg.influence_bound <= 0.0) {
    // default bound: 3x the pooled standard deviation of one-step output
    // increments, a proxy for how hard any single block may push the state
    double acc = 0.0;
    long long n = 0;
    for (int t = splits.train.begin + 1; t < splits.train.end; ++t) {
      for (int c = 0; c < normalized.y.rows(); ++c) {
        const double dv = normalized.y(c, t) - normalized.y(c, t - 1);
        acc += dv * dv;
        ++n;
      }
    }
    loss_cfg.influence_bound = 3.0 * std::sqrt(acc / std::max<long long>(n, 1));
  }

  SsmTrainResult result;
  result.influence_bound_used = loss_cfg.influence_bound;

  std::vector<int> anchors = window_anchors(splits.train, m.arch.n_past, cfg.horizon);
  if (anchors.empty()) throw ContractError("train_ssm: train split too short");

  std::vector<Param*> params = m.params();
  AdamOptimizer opt(cfg.optimizer);
  Rng shuffle_rng(Rng::stream(cfg.seed, 10).raw());

  std::vector<Tensor> best_values;
  const auto snapshot = [&]() {
    best_values.clear();
    for (Param* p : params) best_values.push_back(p->value);
  };

  result.best_dev_nmse = open_loop_nmse(m, normalized, splits.dev, cfg.horizon);
  result.best_epoch = 0;
  snapshot();

  int stale = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // deterministic Fisher-Yates reshuffle per epoch
    for (size_t i = anchors.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1));
      std::swap(anchors[i - 1], anchors[j]);
    }
    double train_loss_acc = 0.0;
    int batches = 0;
    for (size_t start = 0; start < anchors.size(); start += cfg.batch_size) {
      const size_t end = std::min(anchors.size(), start + cfg.batch_size);
      std::vector<int> part(anchors.begin() + start, anchors.begin() + end);
      SysIdBatch batch = make_sysid_batch(normalized, part, m.arch.n_past, cfg.horizon);
      Graph g;
      Var loss = sysid_loss(m, g, batch, loss_cfg);
      const double lv = g.value(loss).item();
      if (!std::isfinite(lv))
        throw TrainingError("train_ssm: non-finite loss at epoch " + std::to_string(epoch));
      train_loss_acc += lv;
      ++batches;
      GradientMap grads = g.backward(loss);
      opt.step(params, grads);
    }
    const double dev = open_loop_nmse(m, normalized, splits.dev, cfg.horizon);
    if (dev < result.best_dev_nmse) {
      result.best_dev_nmse = dev;
      result.best_epoch = epoch;
      snapshot();
      stale = 0;
    } else {
      ++stale;
    }
    result.history.push_back(
        EpochRecord{epoch, train_loss_acc / std::max(batches, 1), dev, result.best_dev_nmse});
    if (cfg.stop_dev_nmse > 0.0 && result.best_dev_nmse < cfg.stop_dev_nmse) break;
    if (cfg.patience > 0 && stale >= cfg.patience) break;
  }

  for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace dpc
