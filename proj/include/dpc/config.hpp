#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpc/plant.hpp"
#include "dpc/policy.hpp"
#include "dpc/ssm.hpp"

namespace dpc {

struct SsmSection {
  int n_x = 9;
  int n_past = 0;  // 0 = use run.horizon
  std::vector<int> observer_hidden{64};
  std::vector<int> input_hidden{64};
  std::vector<int> dist_hidden{32};
  std::string state_map = "stable";
  double lambda_min = 0.8;
  double lambda_max = 0.99;
  std::string activation = "gelu";
  int epochs = 300;
  int batch_size = 256;
  int patience = 0;
  double stop_dev_nmse = 0.0;
  double fit_weight = 1.0;
  double smooth_weight = 0.0;
  double influence_weight = 1.0;
  double influence_bound = 0.0;  // 0 = from data statistics
};

struct PolicySection {
  std::vector<int> hidden{100, 100, 100};
  std::string activation = "gelu";
  std::vector<std::string> feature_segments{"past_outputs", "output_lower_bounds",
                                            "disturbances"};
  int updates = 1000;
  int batch_size = 128;
  int dev_interval = 20;
};

struct LossSection {
  double q_umin = 1.0;
  double q_du = 1.0;
  double q_y = 50.0;
  double q_u = 50.0;
  std::string penalty = "relu";
};

struct RunSection {
  std::uint64_t seed = 1;
  int horizon = 16;
  int days = 90;
  int sim_days = 7;
  double sim_init_temp = 21.0;
  std::string data_dir = "data";
  ExcitationConfig excitation;
  BoundsConfig bounds;
};

// Full experiment configuration: JSON sections
// {plant, ssm, policy, loss, optimizer, run}; unknown keys are rejected and
// cross-section dimensions are validated before any command runs.
struct RunConfig {
  PlantConfig plant;
  DisturbanceConfig disturbance;  // nested under the plant section
  SsmSection ssm;
  PolicySection policy;
  LossSection loss;
  AdamConfig optimizer;
  RunSection run;

  int n_past() const { return ssm.n_past > 0 ? ssm.n_past : run.horizon; }

  SsmArch ssm_arch() const;
  FeatureLayout feature_layout() const;
  LossWeights loss_weights() const;

  void validate() const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& cfg);

// FNV-1a over the canonical serialized form
std::string config_hash(const RunConfig& cfg);
std::string fnv1a_hex(const std::string& data);

}  // namespace dpc
