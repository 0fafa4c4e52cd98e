#include "dpc/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dpc/errors.hpp"
#include "json.hpp"

namespace dpc {

SimScenario make_sim_scenario(const RunConfig& cfg, std::uint64_t seed) {
  SimScenario s;
  s.horizon = cfg.run.horizon;
  s.n_past = cfg.n_past();
  s.steps = cfg.run.sim_days * cfg.disturbance.period_samples;
  s.init_temp = cfg.run.sim_init_temp;
  s.ts_seconds = cfg.plant.ts_seconds;
  s.cp_water = cfg.plant.cp_water;
  s.d = synth_disturbance(s.steps + s.horizon, cfg.disturbance, seed);
  synth_bounds_schedule(s.steps + s.horizon + 1, cfg.plant.n_y(), cfg.run.bounds, seed, s.y_lb,
                        s.y_ub);
  const int n_u = cfg.plant.n_u();
  s.u_lb = Tensor(n_u, 1, 0.0);
  s.u_ub = Tensor(n_u, 1, 0.0);
  s.u_lb(0, 0) = cfg.plant.t_sup_min;
  s.u_ub(0, 0) = cfg.plant.t_sup_max;
  for (int j = 1; j < n_u; ++j) s.u_ub(j, 0) = cfg.plant.flow_max;
  return s;
}

Tensor PolicyController::act(const SimObservation& obs) {
  std::map<std::string, Tensor> segments{{"past_outputs", obs.past},
                                         {"output_lower_bounds", obs.y_lb_future},
                                         {"output_upper_bounds", obs.y_ub_future},
                                         {"disturbances", obs.d_future}};
  return policy_apply_receding(policy_, segments);
}

Tensor TruePlantBackend::reset(double init_temp) {
  state_ = model_.initial_state(init_temp);
  return model_.outputs(state_);
}

Tensor TruePlantBackend::step(const Tensor& u, double d) {
  const int z = model_.config().n_zones;
  PlantStepResult res = model_.step(state_, u(0, 0), slice_rows(u, 1, z), d);
  state_ = res.state;
  return res.y;
}

Tensor NominalModelBackend::reset(double init_temp) {
  Tensor y0(model_.arch.n_y, 1, init_temp);
  window_.assign(model_.arch.n_past, y0);
  return y0;
}

Tensor NominalModelBackend::step(const Tensor& u, double d) {
  Graph g;
  Tensor past(model_.arch.n_past * model_.arch.n_y, 1);
  for (int k = 0; k < model_.arch.n_past; ++k)
    for (int c = 0; c < model_.arch.n_y; ++c)
      past(k * model_.arch.n_y + c, 0) = window_[k](c, 0);
  Var past_std = g.constant(standardize_rows(past, stats_.y_mean, stats_.y_std));
  Var u_std = g.constant(scale_rows(u, stats_.u_scale, true));
  Tensor d_t(1, 1, d);
  Var d_std = g.constant(standardize_rows(d_t, stats_.d_mean, stats_.d_std));
  Var x = estimate_initial_state(model_, g, past_std, true);
  SsmStepResult res = ssm_step(model_, g, x, u_std, d_std, true);
  Tensor y = destandardize_rows(g.value(res.y_next), stats_.y_mean, stats_.y_std);
  window_.erase(window_.begin());
  window_.push_back(y);
  return y;
}

EvalReport run_closed_loop(PlantBackend& plant, Controller& controller,
                           const SimScenario& sc) {
  if (sc.steps < 1) throw ContractError("simulation needs at least one step");
  if (sc.d.cols() < sc.steps + sc.horizon)
    throw ValidationError("disturbance forecast does not cover the run: have " +
                          std::to_string(sc.d.cols()) + " samples, need " +
                          std::to_string(sc.steps + sc.horizon));
  if (sc.y_lb.cols() < sc.steps + sc.horizon + 1)
    throw ValidationError("bounds schedule does not cover the run");

  const int n_y = sc.y_lb.rows();
  const int n_u = sc.u_lb.rows();

  EvalReport rep;
  rep.u_log = Tensor(n_u, sc.steps);
  rep.y_log = Tensor(n_y, sc.steps);
  rep.y_lb_log = Tensor(n_y, sc.steps);
  rep.y_ub_log = Tensor(n_y, sc.steps);
  rep.ts_seconds = sc.ts_seconds;

  Tensor y = plant.reset(sc.init_temp);
  std::vector<Tensor> window(sc.n_past, y);
  Tensor u_prev(n_u, 1, 0.0);

  double viol_sum = 0.0, viol_max = 0.0;
  int viol_count = 0;

  for (int t = 0; t < sc.steps; ++t) {
    SimObservation obs;
    obs.past = Tensor(sc.n_past * n_y, 1);
    for (int k = 0; k < sc.n_past; ++k)
      for (int c = 0; c < n_y; ++c) obs.past(k * n_y + c, 0) = window[k](c, 0);
    obs.y_lb_future = Tensor(sc.horizon * n_y, 1);
    obs.y_ub_future = Tensor(sc.horizon * n_y, 1);
    for (int k = 0; k < sc.horizon; ++k)
      for (int c = 0; c < n_y; ++c) {
        obs.y_lb_future(k * n_y + c, 0) = sc.y_lb(c, t + 1 + k);
        obs.y_ub_future(k * n_y + c, 0) = sc.y_ub(c, t + 1 + k);
      }
    obs.d_future = Tensor(sc.horizon, 1);
    for (int k = 0; k < sc.horizon; ++k) obs.d_future(k, 0) = sc.d(0, t + k);
    obs.u_lb = sc.u_lb;
    obs.u_ub = sc.u_ub;

    Tensor u = controller.act(obs);
    if (u.rows() != n_u || u.cols() != 1)
      throw DimensionError("controller returned " + u.shape_str() + ", expected " +
                           std::to_string(n_u) + "x1");
    bool clamped = false;
    for (int j = 0; j < n_u; ++j) {
      const double lo = sc.u_lb(j, 0), hi = sc.u_ub(j, 0);
      if (u(j, 0) < lo || u(j, 0) > hi) clamped = true;
      u(j, 0) = std::min(std::max(u(j, 0), lo), hi);
    }
    if (clamped) ++rep.metrics.saturation_events;

    // energy through the radiators before the step, using the measured y
    for (int j = 0; j + 1 < n_u; ++j)
      rep.metrics.energy_joules += u(1 + j, 0) * sc.cp_water * (u(0, 0) - y(j, 0)) * sc.ts_seconds;

    y = plant.step(u, sc.d(0, t));
    window.erase(window.begin());
    window.push_back(y);

    rep.metrics.energy_u_sq += dpc::sum_squares(u);
    rep.metrics.smoothness_du_sq += dpc::sum_squares(sub(u, u_prev));
    u_prev = u;

    for (int j = 0; j < n_u; ++j) rep.u_log(j, t) = u(j, 0);
    for (int c = 0; c < n_y; ++c) {
      rep.y_log(c, t) = y(c, 0);
      const double lb = sc.y_lb(c, t + 1), ub = sc.y_ub(c, t + 1);
      rep.y_lb_log(c, t) = lb;
      rep.y_ub_log(c, t) = ub;
      const double depth = std::max({lb - y(c, 0), y(c, 0) - ub, 0.0});
      if (depth > 0.0) {
        ++viol_count;
        viol_sum += depth;
        viol_max = std::max(viol_max, depth);
      }
    }
  }

  rep.metrics.steps = sc.steps;
  rep.metrics.zone_steps = sc.steps * n_y;
  rep.metrics.violation_rate = static_cast<double>(viol_count) / rep.metrics.zone_steps;
  rep.metrics.mean_violation = viol_count > 0 ? viol_sum / viol_count : 0.0;
  rep.metrics.max_violation = viol_max;
  return rep;
}

namespace {

using nlohmann::json;

json metrics_to_json(const EvalMetrics& m) {
  return json{{"steps", m.steps},
              {"zone_steps", m.zone_steps},
              {"violation_rate", m.violation_rate},
              {"mean_violation", m.mean_violation},
              {"max_violation", m.max_violation},
              {"energy_u_sq", m.energy_u_sq},
              {"energy_joules", m.energy_joules},
              {"smoothness_du_sq", m.smoothness_du_sq},
              {"saturation_events", m.saturation_events}};
}

std::vector<double> tensor_flat(const Tensor& t) {
  return std::vector<double>(t.flat().begin(), t.flat().end());
}

}  // namespace

void write_eval_report(const std::string& path, const EvalReport& rep) {
  json j;
  j["format"] = "dpc-report-v1";
  j["plant"] = rep.plant_kind;
  j["config_hash"] = rep.config_hash;
  j["ts_seconds"] = rep.ts_seconds;
  j["metrics"] = metrics_to_json(rep.metrics);
  j["trajectories"] = {{"n_u", rep.u_log.rows()},   {"n_y", rep.y_log.rows()},
                       {"u", tensor_flat(rep.u_log)}, {"y", tensor_flat(rep.y_log)},
                       {"y_lb", tensor_flat(rep.y_lb_log)}, {"y_ub", tensor_flat(rep.y_ub_log)}};
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << j.dump(1) << "\n";
}

EvalMetrics load_eval_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
  const json& m = j.at("metrics");
  EvalMetrics out;
  out.steps = m.at("steps").get<int>();
  out.zone_steps = m.at("zone_steps").get<int>();
  out.violation_rate = m.at("violation_rate").get<double>();
  out.mean_violation = m.at("mean_violation").get<double>();
  out.max_violation = m.at("max_violation").get<double>();
  out.energy_u_sq = m.at("energy_u_sq").get<double>();
  out.energy_joules = m.at("energy_joules").get<double>();
  out.smoothness_du_sq = m.at("smoothness_du_sq").get<double>();
  out.saturation_events = m.at("saturation_events").get<int>();
  return out;
}

void write_trajectory_csv(const std::string& path, const EvalReport& rep) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  char buf[40];
  out << "time";
  for (int j = 0; j < rep.u_log.rows(); ++j) out << ",u_" << j;
  for (int c = 0; c < rep.y_log.rows(); ++c) out << ",y_" << c;
  for (int c = 0; c < rep.y_log.rows(); ++c) out << ",ylb_" << c;
  for (int c = 0; c < rep.y_log.rows(); ++c) out << ",yub_" << c;
  out << "\n";
  for (int t = 0; t < rep.metrics.steps; ++t) {
    std::snprintf(buf, sizeof(buf), "%.17g", (t + 1) * rep.ts_seconds);
    out << buf;
    const auto emit = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    };
    for (int j = 0; j < rep.u_log.rows(); ++j) emit(rep.u_log(j, t));
    for (int c = 0; c < rep.y_log.rows(); ++c) emit(rep.y_log(c, t));
    for (int c = 0; c < rep.y_log.rows(); ++c) emit(rep.y_lb_log(c, t));
    for (int c = 0; c < rep.y_log.rows(); ++c) emit(rep.y_ub_log(c, t));
    out << "\n";
  }
}

std::vector<MetricSummary> aggregate_metrics(const std::vector<EvalMetrics>& runs) {
  if (runs.empty()) throw ContractError("aggregate_metrics: no reports");
  const std::vector<std::pair<std::string, std::function<double(const EvalMetrics&)>>> fields{
      {"violation_rate", [](const EvalMetrics& m) { return m.violation_rate; }},
      {"mean_violation", [](const EvalMetrics& m) { return m.mean_violation; }},
      {"max_violation", [](const EvalMetrics& m) { return m.max_violation; }},
      {"energy_u_sq", [](const EvalMetrics& m) { return m.energy_u_sq; }},
      {"energy_joules", [](const EvalMetrics& m) { return m.energy_joules; }},
      {"smoothness_du_sq", [](const EvalMetrics& m) { return m.smoothness_du_sq; }},
      {"saturation_events",
       [](const EvalMetrics& m) { return static_cast<double>(m.saturation_events); }},
  };
  std::vector<MetricSummary> rows;
  for (const auto& [name, get] : fields) {
    MetricSummary row;
    row.name = name;
    row.min = get(runs.front());
    row.max = row.min;
    double acc = 0.0;
    for (const EvalMetrics& m : runs) {
      const double v = get(m);
      acc += v;
      row.min = std::min(row.min, v);
      row.max = std::max(row.max, v);
    }
    row.mean = acc / runs.size();
    double var = 0.0;
    for (const EvalMetrics& m : runs) {
      const double dv = get(m) - row.mean;
      var += dv * dv;
    }
    row.spread = runs.size() > 1 ? std::sqrt(var / (runs.size() - 1)) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

void write_summary_csv(const std::string& path, const std::vector<MetricSummary>& rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << "metric,mean,spread,min,max\n";
  char buf[40];
  for (const MetricSummary& r : rows) {
    out << r.name;
    for (double v : {r.mean, r.spread, r.min, r.max}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
}

std::string format_summary_table(const std::vector<MetricSummary>& rows) {
  std::string s = "metric                 mean         spread       min          max\n";
  char line[160];
  for (const MetricSummary& r : rows) {
    std::snprintf(line, sizeof(line), "%-20s %12.6g %12.6g %12.6g %12.6g\n", r.name.c_str(),
                  r.mean, r.spread, r.min, r.max);
    s += line;
  }
  return s;
}

}  // namespace dpc
