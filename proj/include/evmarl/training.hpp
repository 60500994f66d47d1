#pragma once

// Rewards, per-agent losses, the assembled model, and the joint training loop
// for all agents plus the fusion network.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "evmarl/agents.hpp"
#include "evmarl/config.hpp"
#include "evmarl/diffcomp.hpp"
#include "evmarl/marlcc.hpp"
#include "evmarl/synthenv.hpp"

namespace evmarl {

// --- rewards --------------------------------------------------------------

double f_dis(double x, double d_t, double d_next, double theta);

/// Reward of one boundary move: rho for HOLD, f_dis(beta) for a move that
/// breaks the validity condition, otherwise a distance-shaped +/- term.
double boundary_reward(const BoundaryMove& move, double gt_boundary, const RewardConfig& cfg);

double step_reward(double start_reward, double end_reward);

/// Fills start_reward, end_reward and reward on every step.
void assign_rewards(AgentTrace& trace, const Interval& gt, const RewardConfig& cfg);

/// R_t = sum_{k>=t} discount^(k-t) r_k.
std::vector<double> discounted_returns(std::span<const double> rewards, double discount);

// --- losses ---------------------------------------------------------------

struct LossBreakdown {
  double evi = 0.0, iou = 0.0, dist = 0.0, loc = 0.0, policy = 0.0, value = 0.0;
  double total = 0.0;
};

struct PolicyValueLoss {
  double policy = 0.0;
  double value = 0.0;
};

/// Advantage actor-critic losses from recorded log-probs, values and rewards.
PolicyValueLoss policy_value_loss(const AgentTrace& trace, double discount);

struct AuxLoss {
  double iou = 0.0, dist = 0.0, loc = 0.0;
};

/// Scanner-tIoU, boundary-distance and location-class losses. Throws
/// std::invalid_argument for an OOS episode.
AuxLoss auxiliary_losses(const AgentTrace& trace, const Episode& ep, double f0);

/// Mean evidential loss over the trace.
double trace_evidential_loss(const AgentTrace& trace, const Episode& ep, double f0);

/// Sum of the weighted components; supervised terms are zero for OOS episodes.
LossBreakdown agent_loss(const AgentTrace& trace, const Episode& ep, const LossWeights& w,
                         double f0, double discount);

struct TapeLoss {
  Var total;
  LossBreakdown parts;
};

/// Records the same loss on the tape of a rollout.
TapeLoss agent_loss(Tape& tape, const Rollout& r, const Episode& ep, const LossWeights& w, double f0,
                    double discount);

// --- model ----------------------------------------------------------------

struct Model {
  ParameterStore store;
  std::vector<AgentNet> agents;  // ESRL, EMover, EDark
  FusionNet fusion;
  AgentConfig agent_cfg;
  int d_v = 0;
  int d_q = 0;
};

/// All parameters zero; call init_model for training.
Model build_model(const RunConfig& cfg);
void init_model(Model& model, Rng& rng);

struct SystemResult {
  std::vector<AgentTrace> traces;
  std::vector<double> u;
  std::size_t winner = 0;
  double eta = 0.0;

  const Interval& final() const { return traces[winner].final; }
  std::vector<Interval> finals() const;
};

/// Rolls out every agent and scores them with the fusion network.
SystemResult run_system(const Model& model, const Episode& ep, ActionMode mode, Rng& rng);

// --- training loop --------------------------------------------------------

struct EpochRow {
  int epoch = 0;
  std::string split;
  LossBreakdown loss;
  double trust = 0.0;
  double total = 0.0;  // agent totals plus trust
  double acc50 = 0.0;
  double acc70 = 0.0;
};

struct TrainLog {
  std::vector<EpochRow> rows;
};

/// Rng streams used by a run, derived from the run seed.
Rng init_rng(std::uint64_t seed);
Rng train_rng(std::uint64_t seed);

/// Trains every agent and the fusion network jointly on the matched episodes
/// of `train_set`, one Adam step per `batch_size` episodes. If `val_set` is
/// non-empty and eval_each_epoch is set, a greedy validation row follows each
/// epoch's training row.
TrainLog train(const RunConfig& cfg, std::span<const Episode> train_set, std::span<const Episode> val_set,
               Model& model, Rng& rng, const std::function<void(const EpochRow&)>& on_row = {});

/// Greedy losses and winner accuracy on the matched episodes of a split.
EpochRow evaluate_split(const RunConfig& cfg, std::span<const Episode> episodes, const Model& model,
                        int epoch, const std::string& split);

}  // namespace evmarl
