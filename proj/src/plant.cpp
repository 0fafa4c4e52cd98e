#include "dpc/plant.hpp"

#include <cmath>

#include "dpc/errors.hpp"
#include "dpc/rng.hpp"

namespace dpc {

RCBuildingModel::RCBuildingModel(const PlantConfig& cfg) : cfg_(cfg) {
  if (cfg.n_zones < 1) throw ConfigError("plant.n_zones must be >= 1");
  if (cfg.ts_seconds <= 0 || cfg.substeps < 1) throw ConfigError("plant sampling setup invalid");
  if (!(cfg.t_sup_min < cfg.t_sup_max)) throw ConfigError("plant supply temperature range invalid");
  if (cfg.flow_max <= 0) throw ConfigError("plant.flow_max must be positive");

  const int z = cfg.n_zones;
  const int nx = cfg.n_x();
  // state layout: [air_0..air_{z-1}, wall_0.., floor_0..]
  const auto air = [&](int j) { return j; };
  const auto wall = [&](int j) { return z + j; };
  const auto floor = [&](int j) { return 2 * z + j; };

  // continuous-time generator: dx/dt = G x + g_amb * T_amb + B_c q
  Tensor gmat(nx, nx, 0.0), gamb(nx, 1, 0.0), bc(nx, z, 0.0);
  const auto couple = [&](int i, int k, double r, double c) {
    gmat(i, i) -= 1.0 / (r * c);
    gmat(i, k) += 1.0 / (r * c);
  };
  for (int j = 0; j < z; ++j) {
    couple(air(j), wall(j), cfg.r_air_wall, cfg.c_air);
    couple(air(j), floor(j), cfg.r_air_floor, cfg.c_air);
    gmat(air(j), air(j)) -= 1.0 / (cfg.r_infiltration * cfg.c_air);
    gamb(air(j), 0) += 1.0 / (cfg.r_infiltration * cfg.c_air);
    if (z > 1) {
      // ring coupling between neighbouring zone air nodes
      couple(air(j), air((j + 1) % z), cfg.r_zone_zone, cfg.c_air);
      if (z > 2) couple(air(j), air((j + z - 1) % z), cfg.r_zone_zone, cfg.c_air);
    }
    bc(air(j), j) = 1.0 / cfg.c_air;

    couple(wall(j), air(j), cfg.r_air_wall, cfg.c_wall);
    gmat(wall(j), wall(j)) -= 1.0 / (cfg.r_wall_out * cfg.c_wall);
    gamb(wall(j), 0) += 1.0 / (cfg.r_wall_out * cfg.c_wall);

    couple(floor(j), air(j), cfg.r_air_floor, cfg.c_floor);
    gmat(floor(j), floor(j)) -= 1.0 / (cfg.r_floor_out * cfg.c_floor);
    gamb(floor(j), 0) += 1.0 / (cfg.r_floor_out * cfg.c_floor);
  }

  // zero-order-hold discretization by substepped Euler:
  // x+ = P^m x + (sum_k P^k dt) (g T_amb + B_c q), P = I + dt G
  const double dt = cfg.ts_seconds / cfg.substeps;
  Tensor p = Tensor::identity(nx);
  for (int i = 0; i < nx; ++i)
    for (int k = 0; k < nx; ++k) p(i, k) += dt * gmat(i, k);
  Tensor acc = Tensor::identity(nx);
  Tensor s(nx, nx, 0.0);
  for (int m = 0; m < cfg.substeps; ++m) {
    for (int i = 0; i < nx; ++i)
      for (int k = 0; k < nx; ++k) s(i, k) += dt * acc(i, k);
    acc = matmul(p, acc);
  }
  a_ = acc;
  b_ = matmul(s, bc);
  e_ = matmul(s, gamb);
  c_ = Tensor(z, nx, 0.0);
  for (int j = 0; j < z; ++j) c_(j, j) = 1.0;
}

PlantState RCBuildingModel::initial_state(double temp) const {
  return PlantState{Tensor(cfg_.n_x(), 1, temp), 0};
}

PlantStepResult RCBuildingModel::step(const PlantState& s, double t_sup, const Tensor& flows,
                                      double t_amb) const {
  const int z = cfg_.n_zones;
  if (flows.rows() != z || flows.cols() != 1)
    throw DimensionError("plant step: flows must be " + std::to_string(z) + "x1, got " +
                         flows.shape_str());
  bool saturated = false;
  const auto clamp = [&saturated](double v, double lo, double hi) {
    if (v < lo || v > hi) saturated = true;
    return std::min(std::max(v, lo), hi);
  };
  const double ts = clamp(t_sup, cfg_.t_sup_min, cfg_.t_sup_max);
  const Tensor y = outputs(s);
  Tensor q(z, 1);
  for (int j = 0; j < z; ++j) {
    const double flow = clamp(flows(j, 0), 0.0, cfg_.flow_max);
    q(j, 0) = flow * cfg_.cp_water * (ts - y(j, 0));
  }
  Tensor x_next = add(add(matmul(a_, s.x), matmul(b_, q)), scale(e_, t_amb));
  PlantStepResult res{PlantState{x_next, s.time_index + 1}, matmul(c_, x_next), saturated};
  return res;
}

Tensor synth_disturbance(int samples, const DisturbanceConfig& cfg, std::uint64_t seed) {
  if (samples < 1) throw ContractError("synth_disturbance: samples must be >= 1");
  Tensor d(1, samples);
  Rng rng(Rng::stream(seed, 0).raw());
  double noise = 0.0;
  const double two_pi = 2.0 * M_PI;
  for (int t = 0; t < samples; ++t) {
    const double phase = two_pi * (t - cfg.daily_min_sample) / cfg.period_samples;
    double v = cfg.mean - cfg.amplitude * std::cos(phase);
    if (cfg.noise_amp > 0.0) {
      noise = cfg.noise_ar * noise + cfg.noise_amp * rng.uniform(-1.0, 1.0);
      v += noise;
    }
    d(0, t) = v;
  }
  return d;
}

SysIdGenResult generate_sysid_dataset(const RCBuildingModel& plant, int days,
                                      const ExcitationConfig& exc, const DisturbanceConfig& dist,
                                      std::uint64_t seed) {
  if (days < 1) throw ContractError("generate_sysid_dataset: days must be >= 1");
  const PlantConfig& cfg = plant.config();
  const int samples = days * dist.period_samples;
  const int z = cfg.n_zones;

  SysIdGenResult out;
  out.series.u = Tensor(cfg.n_u(), samples);
  out.series.d = synth_disturbance(samples, dist, seed);
  out.series.y = Tensor(z, samples);
  out.splits = equal_thirds(samples);

  Rng rng(Rng::stream(seed, 1).raw());
  PlantState state = plant.initial_state(cfg.init_temp);
  Tensor flows(z, 1, 0.5 * cfg.flow_max);
  for (int t = 0; t < samples; ++t) {
    const Tensor y = plant.outputs(state);
    for (int j = 0; j < z; ++j) out.series.y(j, t) = y(j, 0);

    const double t_sup = rng.uniform(cfg.t_sup_min, cfg.t_sup_max);
    for (int j = 0; j < z; ++j) {
      double f = flows(j, 0) + exc.flow_walk_step * cfg.flow_max * rng.uniform(-1.0, 1.0);
      flows(j, 0) = std::min(std::max(f, 0.0), cfg.flow_max);
    }
    out.series.u(0, t) = t_sup;
    for (int j = 0; j < z; ++j) out.series.u(1 + j, t) = flows(j, 0);

    state = plant.step(state, t_sup, flows, out.series.d(0, t)).state;
  }
  return out;
}

void synth_bounds_schedule(int samples, int n_y, const BoundsConfig& cfg, std::uint64_t seed,
                           Tensor& y_lb, Tensor& y_ub) {
  if (!(cfg.night_lb_min <= cfg.night_lb_max && cfg.day_lb_min <= cfg.day_lb_max &&
        cfg.band_min <= cfg.band_max && cfg.band_min > 0.0)) {
    throw ConfigError("bounds config ranges are misordered");
  }
  if (!(0 <= cfg.day_start_hour && cfg.day_start_hour < cfg.day_end_hour && cfg.day_end_hour <= 24))
    throw ConfigError("bounds config day window invalid");
  y_lb = Tensor(n_y, samples);
  y_ub = Tensor(n_y, samples);
  Rng rng(Rng::stream(seed, 2).raw());
  const int per_day = 96;
  double night = 17.0, day = 20.5, band = 4.0;
  for (int t = 0; t < samples; ++t) {
    if (t % per_day == 0) {
      night = rng.uniform(cfg.night_lb_min, cfg.night_lb_max);
      day = rng.uniform(cfg.day_lb_min, cfg.day_lb_max);
      band = rng.uniform(cfg.band_min, cfg.band_max);
    }
    const int hour = (t % per_day) / 4;
    const bool daytime = hour >= cfg.day_start_hour && hour < cfg.day_end_hour;
    const double lb = daytime ? day : night;
    for (int j = 0; j < n_y; ++j) {
      y_lb(j, t) = lb;
      y_ub(j, t) = lb + band;
    }
  }
}

CtrlGenResult generate_ctrl_dataset(const RCBuildingModel& plant, int days,
                                    const ExcitationConfig& exc, const DisturbanceConfig& dist,
                                    const BoundsConfig& bounds, std::uint64_t seed) {
  if (days < 1) throw ContractError("generate_ctrl_dataset: days must be >= 1");
  const PlantConfig& cfg = plant.config();
  const int per_day = dist.period_samples;
  const int samples = days * per_day;
  const int z = cfg.n_zones;

  CtrlGenResult out;
  out.series.d = synth_disturbance(samples, dist, seed + 1);
  out.series.y_pert = Tensor(z, samples);
  synth_bounds_schedule(samples, z, bounds, seed, out.series.y_lb, out.series.y_ub);
  out.series.u_lb = Tensor(cfg.n_u(), samples, 0.0);
  out.series.u_ub = Tensor(cfg.n_u(), samples, 0.0);
  for (int t = 0; t < samples; ++t) {
    out.series.u_lb(0, t) = cfg.t_sup_min;
    out.series.u_ub(0, t) = cfg.t_sup_max;
    for (int j = 0; j < z; ++j) out.series.u_ub(1 + j, t) = cfg.flow_max;
  }
  out.splits = equal_thirds(samples);

  Rng rng(Rng::stream(seed, 3).raw());
  PlantState state = plant.initial_state(cfg.init_temp);
  Tensor flows(z, 1, 0.0);
  for (int t = 0; t < samples; ++t) {
    if (t % per_day == 0) {
      // fresh initial condition each day: envelope nodes drawn uniformly
      for (double& v : state.x.flat()) v = rng.uniform(15.0, 25.0);
      for (int j = 0; j < z; ++j) flows(j, 0) = rng.uniform(0.0, 0.5 * cfg.flow_max);
    }
    const Tensor y = plant.outputs(state);
    for (int j = 0; j < z; ++j) out.series.y_pert(j, t) = y(j, 0);

    const double t_sup = rng.uniform(cfg.t_sup_min, cfg.t_sup_max);
    for (int j = 0; j < z; ++j) {
      double f = flows(j, 0) + exc.flow_walk_step * cfg.flow_max * rng.uniform(-1.0, 1.0);
      flows(j, 0) = std::min(std::max(f, 0.0), cfg.flow_max);
    }
    state = plant.step(state, t_sup, flows, out.series.d(0, t)).state;
  }
  return out;
}

}  // namespace dpc
