#pragma once

#include <cstdint>
#include <vector>

#include "dpc/dataset.hpp"
#include "dpc/tensor.hpp"

namespace dpc {

// Ground-truth building physics: one air, wall and floor node per zone, zones
// ring-coupled through the air nodes, everything leaking toward ambient.
// Values give dominant envelope time constants in the tens of hours at the
// 15-minute sample time.
struct PlantConfig {
  int n_zones = 3;
  double ts_seconds = 900.0;
  int substeps = 60;  // internal Euler substeps per sample for discretization

  // thermal capacitances (J/K) and resistances (K/W), per zone
  double c_air = 2.5e6;
  double c_wall = 1.0e7;
  double c_floor = 8.0e6;
  double r_air_wall = 0.004;
  double r_wall_out = 0.004;
  double r_air_floor = 0.01;
  double r_floor_out = 0.04;
  double r_zone_zone = 0.02;
  double r_infiltration = 0.05;

  // hydronic heating
  double cp_water = 4186.0;  // J/(kg K)
  double t_sup_min = 20.0;   // deg C
  double t_sup_max = 55.0;
  double flow_max = 0.08;  // kg/s per zone

  double init_temp = 20.0;

  int n_u() const { return 1 + n_zones; }  // [T_sup, mdot_0..]
  int n_y() const { return n_zones; }
  int n_x() const { return 3 * n_zones; }
};

struct DisturbanceConfig {
  double mean = 5.0;       // deg C
  double amplitude = 5.0;  // daily swing
  double noise_ar = 0.95;  // first-order filter pole
  double noise_amp = 0.5;  // innovation amplitude, 0 disables noise
  int period_samples = 96;
  int daily_min_sample = 16;  // coldest point of the day
};

struct PlantState {
  Tensor x;  // n_x x 1 envelope temperatures
  int time_index = 0;
};

struct PlantStepResult {
  PlantState state;
  Tensor y;  // n_zones x 1 zone air temperatures after the step
  bool saturated = false;
};

class RCBuildingModel {
 public:
  explicit RCBuildingModel(const PlantConfig& cfg);

  const PlantConfig& config() const { return cfg_; }
  const Tensor& a_true() const { return a_; }
  const Tensor& b_heat() const { return b_; }
  const Tensor& ambient_coupling() const { return e_; }
  const Tensor& output_map() const { return c_; }

  PlantState initial_state(double temp) const;
  Tensor outputs(const PlantState& s) const { return matmul(c_, s.x); }

  // Convective heat injection q_j = mdot_j * cp * (t_sup - y_j), then one
  // linear envelope update. Out-of-range actuation is clamped and flagged.
  PlantStepResult step(const PlantState& s, double t_sup, const Tensor& flows, double t_amb) const;

 private:
  PlantConfig cfg_;
  Tensor a_, b_, e_, c_;
};

// Daily sinusoid plus AR(1)-filtered noise; 1 x samples.
Tensor synth_disturbance(int samples, const DisturbanceConfig& cfg, std::uint64_t seed);

struct ExcitationConfig {
  double flow_walk_step = 0.1;  // walk step as a fraction of flow_max
};

struct BoundsConfig {
  int day_start_hour = 6;
  int day_end_hour = 22;
  double night_lb_min = 16.5, night_lb_max = 17.5;
  double day_lb_min = 20.0, day_lb_max = 21.0;
  double band_min = 3.5, band_max = 4.5;
};

struct SysIdGenResult {
  SeriesData series;
  DatasetSplits splits;
};

// Open-loop excitation rollout: per-zone mass-flow random walk plus a
// uniformly resampled supply temperature each step.
SysIdGenResult generate_sysid_dataset(const RCBuildingModel& plant, int days,
                                      const ExcitationConfig& exc, const DisturbanceConfig& dist,
                                      std::uint64_t seed);

struct CtrlGenResult {
  CtrlSeriesData series;
  DatasetSplits splits;
};

// Perturbed-initial-condition rollouts (envelope restarted every day from
// uniform random node temperatures) plus daily square-wave comfort bounds
// with per-day randomized levels and constant actuator bounds.
CtrlGenResult generate_ctrl_dataset(const RCBuildingModel& plant, int days,
                                    const ExcitationConfig& exc, const DisturbanceConfig& dist,
                                    const BoundsConfig& bounds, std::uint64_t seed);

// Square-wave comfort schedule used by both the control dataset and the
// closed-loop simulation scenarios; n_y x samples lower/upper pair.
void synth_bounds_schedule(int samples, int n_y, const BoundsConfig& cfg, std::uint64_t seed,
                           Tensor& y_lb, Tensor& y_ub);

}  // namespace dpc
