#pragma once

#include <string>

#include "dpc/policy.hpp"
#include "dpc/ssm.hpp"

namespace dpc {

// Checkpoints are JSON documents holding named parameter blocks with shapes
// and flat row-major arrays, the originating config hash, and the
// normalization statistics needed to run the artifact standalone. Numbers are
// serialized with exact round-trip formatting, so save -> load preserves
// every parameter bit.

struct SsmCheckpoint {
  NeuralSSM model;
  NormStats stats;
  std::string config_hash;
};

void save_ssm_checkpoint(const std::string& path, NeuralSSM& model, const NormStats& stats,
                         const std::string& config_hash);
SsmCheckpoint load_ssm_checkpoint(const std::string& path);

struct PolicyCheckpoint {
  PolicyNet policy;
  std::string config_hash;
};

void save_policy_checkpoint(const std::string& path, PolicyNet& policy,
                            const std::string& config_hash);
PolicyCheckpoint load_policy_checkpoint(const std::string& path);

void save_ssm_history(const std::string& path, const SsmTrainResult& result);
void save_policy_history(const std::string& path, const PolicyTrainResult& result);

}  // namespace dpc
