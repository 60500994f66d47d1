#pragma once

// The three localization agents. ESRL scans the video with a fixed window and
// places boundaries with ADD/HOLD actions; EMover shifts its boundaries
// left/right; EDark is EMover observing the frames outside its interval.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evmarl/core.hpp"
#include "evmarl/diffcomp.hpp"
#include "evmarl/evidential.hpp"
#include "evmarl/synthenv.hpp"

namespace evmarl {

enum class AgentKind { Esrl = 0, EMover = 1, EDark = 2 };

inline constexpr std::array<AgentKind, 3> kAllAgents = {AgentKind::Esrl, AgentKind::EMover,
                                                        AgentKind::EDark};

std::string_view to_string(AgentKind kind);
AgentKind agent_kind_from_string(std::string_view name);
FeatureMode feature_mode(AgentKind kind);

inline constexpr int kNumOffsets = 6;
inline constexpr int kEsrlActions = 1 + kNumOffsets;  // Hold + six Adds
inline constexpr int kMoverActions = 5;

enum class MoverAction { ShiftLeftLarge = 0, ShiftLeftSmall = 1, Hold = 2, ShiftRightSmall = 3,
                         ShiftRightLarge = 4 };

struct AgentConfig {
  int steps = 10;  // T
  double step_size = 0.1;
  double f0 = 0.12;
  std::array<double, kNumOffsets> offsets = {0.0, 0.02, 0.04, 0.08, 0.1, 0.12};
  double shift_large = 0.16;
  double shift_small = 0.05;
  int policy_hidden = 64;
  ObservationConfig obs;

  void validate() const;
  bool operator==(const AgentConfig&) const = default;
};

struct AgentNet {
  AgentKind kind = AgentKind::Esrl;
  ObservationNet obs;
  GruCell policy;  // pi(a|O_t) and s_t from one recurrent core
  Dense start_logits;
  Dense end_logits;
  Dense value;
  EvidenceHead evidence;
  Dense p_iou;   // sigmoid
  Dense p_dist;  // sigmoid, (start, end)
  Dense p_loc;   // 16 logits
};

AgentNet make_agent_net(ParameterStore& store, AgentKind kind, const AgentConfig& cfg, int d_v, int d_q);

int num_actions(AgentKind kind);

/// Scanner window at step t: [t*step, t*step + f0] with the end clamped to 1.
Interval scanner_window(int t, double step_size, double f0);

/// region.start + offsets[i], clamped into the region.
double apply_add(const Interval& region, int offset_index, const std::array<double, kNumOffsets>& offsets);

/// One boundary's move within a step: the proposal before any clamping and
/// the value actually applied.
struct BoundaryMove {
  bool hold = true;
  Boundary which = Boundary::Start;
  double prev = 0.0;
  double candidate = 0.0;
  double applied = 0.0;
  double other = 0.0;  // opposite boundary used for the validity check
  bool valid = true;
};

struct StepRecord {
  int t = 0;
  Interval region;  // scanner window (ESRL) or the interval observed (movers)
  Interval output;  // [l^s_t, l^e_t] after this step's actions
  Evidence evidence;
  double p_iou = 0.0;
  std::array<double, 2> p_dist{};
  std::array<double, kNumLocClasses> p_loc{};
  int start_action = 0;
  int end_action = 0;
  double log_prob = 0.0;  // log pi(start) + log pi(end)
  double value = 0.0;     // s_t
  BoundaryMove start_move;
  BoundaryMove end_move;
  double start_reward = 0.0;
  double end_reward = 0.0;
  double reward = 0.0;
};

struct AgentTrace {
  AgentKind kind = AgentKind::Esrl;
  std::vector<StepRecord> steps;
  Interval final;
};

enum class ActionMode { Sample, Greedy, Uniform };

/// Tape handles of one step, for building losses.
struct StepVars {
  Var evidence, p_iou, p_dist, p_loc, log_prob, value;
};

struct Rollout {
  AgentTrace trace;
  std::vector<StepVars> vars;
};

/// Rolls one agent through T steps, recording everything on `tape`.
Rollout rollout(Tape& tape, const AgentNet& net, const AgentConfig& cfg, const Episode& ep,
                ActionMode mode, Rng& rng);

/// Rollout on a private tape; returns only the trace.
AgentTrace run_episode(const AgentNet& net, const AgentConfig& cfg, const Episode& ep,
                       const ParameterStore& store, ActionMode mode, Rng& rng);

/// Applies a fixed ESRL action pair to its running output. Exposed so the
/// action semantics can be exercised without a network.
Interval esrl_apply(const Interval& current, const Interval& region, int start_action, int end_action,
                    const AgentConfig& cfg, BoundaryMove* start_move = nullptr,
                    BoundaryMove* end_move = nullptr);

/// Applies a mover action pair; shifts clamp so start < end with a gap of at
/// least one frame and both boundaries stay in [0,1].
Interval mover_apply(const Interval& current, MoverAction start_action, MoverAction end_action,
                     const AgentConfig& cfg, int n_frames, BoundaryMove* start_move = nullptr,
                     BoundaryMove* end_move = nullptr);

}  // namespace evmarl
