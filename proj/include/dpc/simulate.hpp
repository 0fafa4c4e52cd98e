#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dpc/config.hpp"
#include "dpc/plant.hpp"
#include "dpc/policy.hpp"

namespace dpc {

// Everything a closed-loop run needs ahead of time: disturbance forecast and
// comfort schedule covering the whole run plus one horizon of preview, and
// the constant actuator bounds.
struct SimScenario {
  int steps = 0;
  int horizon = 0;
  int n_past = 0;
  Tensor d;           // 1 x (steps + horizon)
  Tensor y_lb, y_ub;  // n_y x (steps + horizon + 1)
  Tensor u_lb, u_ub;  // n_u x 1
  double init_temp = 21.0;
  double ts_seconds = 900.0;
  double cp_water = 4186.0;
};

SimScenario make_sim_scenario(const RunConfig& cfg, std::uint64_t seed);

// What a controller sees at each step: measured past outputs plus previews.
struct SimObservation {
  Tensor past;                     // (n_past*n_y) x 1, oldest first
  Tensor y_lb_future, y_ub_future; // (horizon*n_y) x 1, steps t+1..t+N
  Tensor d_future;                 // (horizon*n_d) x 1, steps t..t+N-1
  Tensor u_lb, u_ub;               // n_u x 1
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual Tensor act(const SimObservation& obs) = 0;  // n_u x 1, pre-clamp
};

// Receding-horizon evaluation of a trained policy checkpoint.
class PolicyController : public Controller {
 public:
  explicit PolicyController(const PolicyNet& policy) : policy_(policy) {}
  Tensor act(const SimObservation& obs) override;

 private:
  const PolicyNet& policy_;
};

// The system being controlled: the true RC plant or the identified model run
// autoregressively on its own outputs.
class PlantBackend {
 public:
  virtual ~PlantBackend() = default;
  virtual Tensor reset(double init_temp) = 0;  // returns y_0
  virtual Tensor step(const Tensor& u, double d) = 0;  // applies u_t, returns y_{t+1}
};

class TruePlantBackend : public PlantBackend {
 public:
  explicit TruePlantBackend(const RCBuildingModel& model) : model_(model) {}
  Tensor reset(double init_temp) override;
  Tensor step(const Tensor& u, double d) override;

 private:
  const RCBuildingModel& model_;
  PlantState state_;
};

class NominalModelBackend : public PlantBackend {
 public:
  NominalModelBackend(const NeuralSSM& model, NormStats stats)
      : model_(model), stats_(std::move(stats)) {}
  Tensor reset(double init_temp) override;
  Tensor step(const Tensor& u, double d) override;

 private:
  const NeuralSSM& model_;
  NormStats stats_;
  std::vector<Tensor> window_;  // last n_past outputs, engineering units
};

struct EvalMetrics {
  int steps = 0;
  int zone_steps = 0;
  double violation_rate = 0.0;   // fraction of zone-steps outside [lb, ub]
  double mean_violation = 0.0;   // mean depth over violating zone-steps, deg C
  double max_violation = 0.0;
  double energy_u_sq = 0.0;      // sum_t |u_t|^2
  double energy_joules = 0.0;    // sum_t sum_j mdot cp (t_sup - y_j) ts
  double smoothness_du_sq = 0.0; // sum_t |u_t - u_{t-1}|^2
  int saturation_events = 0;     // steps where the requested u was clamped
};

struct EvalReport {
  EvalMetrics metrics;
  Tensor u_log;                  // n_u x steps, post-clamp controls as applied
  Tensor y_log;                  // n_y x steps, outputs y_1..y_steps
  Tensor y_lb_log, y_ub_log;     // bounds the outputs were scored against
  std::string plant_kind;
  std::string config_hash;
  double ts_seconds = 900.0;
  double wall_seconds = 0.0;     // recorded in the run manifest only
};

// Applies exactly one control per plant step: clamp to actuator bounds,
// apply, score the resulting output against the bounds at its time index.
EvalReport run_closed_loop(PlantBackend& plant, Controller& controller,
                           const SimScenario& scenario);

// report.json keeps metrics + trajectories and is byte-deterministic;
// wall-clock time belongs to the manifest.
void write_eval_report(const std::string& path, const EvalReport& report);
EvalMetrics load_eval_metrics(const std::string& path);
void write_trajectory_csv(const std::string& path, const EvalReport& report);

struct MetricSummary {
  std::string name;
  double mean = 0.0, spread = 0.0, min = 0.0, max = 0.0;
};

// Mean and spread (sample standard deviation) per metric across runs.
std::vector<MetricSummary> aggregate_metrics(const std::vector<EvalMetrics>& runs);
void write_summary_csv(const std::string& path, const std::vector<MetricSummary>& rows);
std::string format_summary_table(const std::vector<MetricSummary>& rows);

}  // namespace dpc
