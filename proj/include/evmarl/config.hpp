#pragma once

// Run configuration. Defaults reproduce the published experiment settings
// (step 0.1, window 0.12, six ADD offsets, T = 10, rho/beta/theta = 0/-0.8/0.4,
// Adam lr 0.001) on the desk-scale synthetic task.

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "evmarl/agents.hpp"
#include "evmarl/diffcomp.hpp"
#include "evmarl/marlcc.hpp"
#include "evmarl/synthenv.hpp"

namespace evmarl {

struct RewardConfig {
  double rho = 0.0;    // HOLD reward
  double beta = -0.8;  // invalid-move argument
  double theta = 0.4;  // discount on the next distance in f_dis
  /// Use the printed case orientation (positive branch when the distance
  /// grows) instead of rewarding distance reduction.
  bool branch_as_printed = false;

  void validate() const;
  bool operator==(const RewardConfig&) const = default;
};

struct LossWeights {
  double evi = 1.0, iou = 1.0, dist = 1.0, loc = 1.0, policy = 1.0, value = 1.0, trust = 1.0;
  bool operator==(const LossWeights&) const = default;
};

struct OptimConfig {
  AdamConfig adam;
  double clip_norm = 5.0;  // global L2; <= 0 disables
  bool operator==(const OptimConfig& o) const {
    return adam.lr == o.adam.lr && adam.beta1 == o.adam.beta1 && adam.beta2 == o.adam.beta2 &&
           adam.eps == o.adam.eps && clip_norm == o.clip_norm;
  }
};

struct TrainConfig {
  int epochs = 30;
  double discount = 0.95;
  int batch_size = 1;
  bool eval_each_epoch = true;
  LossWeights weights;
  bool operator==(const TrainConfig&) const = default;
};

struct RetrievalConfig {
  int pool_size = 50;
  int num_queries = 100;
  bool operator==(const RetrievalConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 42;
  DatasetConfig data;
  AgentConfig agent;
  RewardConfig reward;
  OptimConfig optim;
  TrainConfig train;
  FusionConfig fusion;
  OosObjective oos_objective = OosObjective::F1;
  RetrievalConfig retrieval;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Name of the environment variable that overrides the default seed.
inline constexpr const char* kSeedEnv = "EVMARL_SEED";

/// Defaults, with the seed (and dataset seed) taken from EVMARL_SEED if set.
RunConfig default_config();

/// Parses a config object on top of default_config(). Unknown keys and type
/// mismatches throw std::invalid_argument naming the offending key.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

RunConfig load_config(const std::string& path);

}  // namespace evmarl
