#pragma once

#include <optional>
#include <vector>

#include "dpc/adam.hpp"
#include "dpc/blocks.hpp"
#include "dpc/dataset.hpp"
#include "dpc/penalty.hpp"

namespace dpc {

enum class StateMapKind { stable, linear };

StateMapKind state_map_from_string(const std::string& s);
std::string to_string(StateMapKind k);

struct SsmArch {
  int n_y = 3;
  int n_u = 4;
  int n_d = 1;
  int n_x = 9;
  int n_past = 16;
  std::vector<int> observer_hidden{64};
  std::vector<int> input_hidden{64};
  std::vector<int> dist_hidden{32};
  Activation activation = Activation::gelu;
  StateMapKind state_map = StateMapKind::stable;
  double lambda_min = 0.8;
  double lambda_max = 0.99;
};

// Block-structured state-space model: an observer estimating the hidden state
// from the past output window, additive state/input/disturbance maps, and a
// linear output map with no feedthrough. Input and disturbance maps are
// nonlinear, the state map is linear (stable-by-construction by default).
struct NeuralSSM {
  SsmArch arch;
  MLP observer;    // (n_past*n_y) -> n_x
  StableDynamicsMap state_stable;
  LinearMap state_linear;
  MLP input_map;   // n_u -> n_x
  MLP dist_map;    // n_d -> n_x
  LinearMap output_map;  // n_x -> n_y

  static NeuralSSM make(const SsmArch& arch, Rng& rng);

  std::vector<Param*> params();
  size_t param_count() const;

  // materialized state-transition matrix for one graph, reused by every step
  Var state_matrix(Graph& g, bool frozen = false) const;
  Tensor state_matrix_value() const;
};

// x_t = f_o(Y_p); Y_p stacks n_past outputs, oldest first.
Var estimate_initial_state(const NeuralSSM& m, Graph& g, Var past_window, bool frozen = false);

struct SsmStepResult {
  Var x_next;
  Var y_next;
  // input-block outputs, exposed so the identification loss can bound them
  Var fu_out;
  Var fd_out;
};

// x+ = f_x(x) + f_u(u) + f_d(d); y+ = f_y(x+)
SsmStepResult ssm_step(const NeuralSSM& m, Graph& g, Var x, Var u, Var d, bool frozen = false);

struct SsmRolloutResult {
  Var outputs;  // (horizon*n_y) x batch, steps stacked oldest first
  std::vector<Var> states;     // x_{t+1} .. x_{t+N}
  std::vector<Var> fu_outs;
  std::vector<Var> fd_outs;
};

// N-step open-loop rollout on one graph. controls/disturbances stack horizon
// steps; all shapes are validated against the architecture.
SsmRolloutResult ssm_rollout(const NeuralSSM& m, Graph& g, Var past_window, Var controls,
                             Var disturbances, int horizon, bool frozen = false);

struct SysIdLossConfig {
  double fit_weight = 1.0;
  double smooth_weight = 0.0;      // optional penalty on state increments
  double influence_weight = 1.0;   // penalty on f_u/f_d outputs outside the bound
  double influence_bound = 0.0;    // symmetric bound; <= 0 disables the penalty
  PenaltyKind penalty = PenaltyKind::relu;
};

// Mean squared N-step output-prediction error plus the configured penalties.
Var sysid_loss(const NeuralSSM& m, Graph& g, const SysIdBatch& batch, const SysIdLossConfig& cfg);

struct SysIdConfig {
  int horizon = 16;
  int batch_size = 256;
  int epochs = 300;
  int patience = 0;           // 0 = no early stop on stagnation
  double stop_dev_nmse = 0.0; // stop once dev nMSE falls below; 0 disables
  SysIdLossConfig loss;
  AdamConfig optimizer;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_nmse = 0.0;
  double best_dev_nmse = 0.0;
};

struct SsmTrainResult {
  std::vector<EpochRecord> history;
  double best_dev_nmse = 0.0;
  int best_epoch = -1;
  double influence_bound_used = 0.0;
  double wall_seconds = 0.0;
};

// Normalized view of an operation series: y and d standardized, u divided by
// its per-channel scale.
SeriesData normalize_series(const SeriesData& series, const NormStats& stats);

// N-step open-loop MSE / target variance over all windows of a split.
double open_loop_nmse(const NeuralSSM& m, const SeriesData& normalized, SplitRange split,
                      int horizon, int batch_size = 512);

// Algorithm step 1: Adam descent on sysid_loss over shuffled train-split
// windows, best-on-dev selection, deterministic per seed. The series must
// already be normalized.
SsmTrainResult train_ssm(NeuralSSM& m, const SeriesData& normalized, const DatasetSplits& splits,
                         const SysIdConfig& cfg);

}  // namespace dpc
