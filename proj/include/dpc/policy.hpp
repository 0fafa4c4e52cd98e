#pragma once

#include <map>
#include <string>
#include <vector>

#include "dpc/ssm.hpp"

namespace dpc {

struct FeatureSegment {
  std::string name;
  int rows = 0;
};

struct FeatureLayout {
  std::vector<FeatureSegment> segments;
  int total_rows() const;
};

// Row concatenation of named segments in layout order.
Var assemble_features(Graph& g, const std::map<std::string, Var>& segments,
                      const FeatureLayout& layout);
Tensor assemble_features(const std::map<std::string, Tensor>& segments,
                         const FeatureLayout& layout);

// Per-feature-row standardization applied before the network.
struct FeatureStats {
  std::vector<double> mean, stddev;
};

struct LossWeights {
  double q_umin = 1.0;
  double q_du = 1.0;
  double q_y = 50.0;
  double q_u = 50.0;
  PenaltyKind penalty = PenaltyKind::relu;
};

// Explicit control law: features -> stacked control trajectory. The network
// sees standardized features and emits controls in normalized units; the
// stored u_scale converts to engineering units. Everything needed to deploy
// the law lives on this struct and goes into its checkpoint.
struct PolicyNet {
  MLP net;
  FeatureLayout layout;
  int horizon = 0;
  int n_u = 0;
  FeatureStats feat_stats;        // identity until fitted by the trainer
  std::vector<double> u_scale;

  static PolicyNet make(const FeatureLayout& layout, const std::vector<int>& hidden, int horizon,
                        int n_u, Activation act, Rng& rng);

  std::vector<Param*> params();

  // raw features (engineering units) -> normalized control trajectory
  Var forward_normalized(Graph& g, Var features) const;
  // same, then scaled to engineering units
  Var forward(Graph& g, Var features) const;
};

// Policy plus the frozen identified model it was trained against.
struct ClosedLoopModel {
  PolicyNet* policy = nullptr;
  const NeuralSSM* model = nullptr;
  NormStats ssm_stats;
  int horizon = 0;
};

struct ClosedLoopVars {
  Var controls;       // (horizon*n_u) x n, engineering units
  Var outputs;        // (horizon*n_y) x n, engineering units
  Var controls_norm;  // same trajectories in normalized units
  Var outputs_norm;
};

// One policy evaluation feeding the frozen model rollout, all on one graph.
// The SSM enters as constants, so backward reaches only policy parameters.
ClosedLoopVars closed_loop_rollout(Graph& g, const ClosedLoopModel& cl,
                                   const ScenarioBatch& scenario);

// Economic control loss, Monte-Carlo averaged over the batch columns:
// (1/(nN)) sum_i sum_k [ q_umin|u|^2 + q_du|u_k - u_{k-1}|^2
//    + q_y(|p(y,lb)|^2 + |p(y,ub)|^2) + q_u(|p(u,lb)|^2 + |p(u,ub)|^2) ].
// Operates on whatever units the caller supplies; the trainer passes
// normalized trajectories and bounds.
Var economic_loss(Graph& g, Var controls, Var outputs, Var y_lb, Var y_ub, Var u_lb, Var u_ub,
                  Var u_prev, const LossWeights& weights, int horizon, int n_u);

// First control action of the computed trajectory (receding horizon),
// engineering units, forward pass only.
Tensor policy_apply_receding(const PolicyNet& policy, const std::map<std::string, Tensor>& segments);

struct PolicyTrainConfig {
  int updates = 1000;
  int batch_size = 128;
  int dev_interval = 20;
  AdamConfig optimizer;
  std::uint64_t seed = 1;
};

struct UpdateRecord {
  int update = 0;
  double batch_loss = 0.0;
  double dev_loss = 0.0;      // < 0 when not evaluated at this update
  double best_dev_loss = 0.0;
};

struct PolicyTrainResult {
  std::vector<UpdateRecord> history;
  double initial_dev_loss = 0.0;
  double best_dev_loss = 0.0;
  int best_update = 0;
  double wall_seconds = 0.0;
};

// Algorithm step 2: fits feature statistics on the train split, then runs
// Adam on the economic loss over sampled scenario minibatches with the model
// frozen. Deterministic per seed; best-on-dev parameters are restored.
PolicyTrainResult train_policy(ClosedLoopModel& cl, const CtrlSeriesData& series,
                               const DatasetSplits& splits, const LossWeights& weights,
                               const PolicyTrainConfig& cfg);

}  // namespace dpc
